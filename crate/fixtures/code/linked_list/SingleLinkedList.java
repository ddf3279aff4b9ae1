public class SingleLinkedList {
    private static class Node {
        int value;
        Node next;

        Node(int value) {
            this.value = value;
        }
    }

    private Node head;
    private int size;

    public void add(int value) {
        Node node = new Node(value);
        if (head == null) {
            head = node;
        } else {
            Node cur = head;
            while (cur.next != null) {
                cur = cur.next;
            }
            cur.next = node;
        }
        size++;
    }

    public int size() {
        return size;
    }

    // Removes later copies of any value, keeping the first occurrence.
    public void removeDuplicates() {
        Node outer = head;
        while (outer != null) {
            Node runner = outer;
            while (runner.next != null) {
                if (runner.next.value == outer.value) {
                    runner.next = runner.next.next;
                    size--;
                } else {
                    runner = runner.next;
                }
            }
            outer = outer.next;
        }
    }
}
