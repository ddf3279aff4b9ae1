public class Main {
    public static void main(String[] args) {
        ArrayBinaryTree t = new ArrayBinaryTree(7);
        t.setRoot(1);
        t.setLeft(0, 2);
        t.setRight(0, 3);
        t.setLeft(1, 4);
        t.setRight(1, 5);
        t.setLeft(2, 6);
        t.setRight(2, 7);
        System.out.println("left of root = " + t.left(0));
        System.out.println("right of root = " + t.right(0));
        t.setLeft(3, 8);
        System.out.println("size = " + t.size());
    }
}
