public class Main {
    public static void main(String[] args) {
        BinarySearchTree tree = new BinarySearchTree();
        int[] values = {50, 30, 70, 20, 40, 60, 80, 10, 35, 65};
        for (int v : values) {
            tree.insert(v);
        }
        System.out.println("inorder:  " + tree.inorder());
        System.out.println("preorder: " + tree.preorder());
        System.out.println("min=" + tree.minimum() + " max=" + tree.maximum());
        System.out.println("inorder after min/max: " + tree.inorder());
    }
}
