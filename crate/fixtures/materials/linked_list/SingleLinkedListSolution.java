public class SingleLinkedListSolution {
    private static class Node {
        int value;
        Node next;

        Node(int value) {
            this.value = value;
        }
    }

    private Node head;
    private int size;

    public void removeDuplicates() {
        for (Node outer = head; outer != null; outer = outer.next) {
            Node runner = outer;
            while (runner.next != null) {
                if (runner.next.value == outer.value) {
                    runner.next = runner.next.next;
                    size--;
                } else {
                    runner = runner.next;
                }
            }
        }
    }

    @Override
    public String toString() {
        StringBuilder sb = new StringBuilder("[");
        for (Node cur = head; cur != null; cur = cur.next) {
            sb.append(cur.value);
            if (cur.next != null) {
                sb.append(", ");
            }
        }
        return sb.append(']').toString();
    }
}
