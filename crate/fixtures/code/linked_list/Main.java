public class Main {
    public static void main(String[] args) {
        SingleLinkedList list = new SingleLinkedList();
        int[] values = {4, 8, 4, 15, 16, 8, 23, 42, 15};
        for (int v : values) {
            list.add(v);
        }
        list.removeDuplicates();
        System.out.println("After removeDuplicates (" + list.size() + " nodes):");
        System.out.println(list);
    }
}
