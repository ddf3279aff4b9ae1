public class ArrayBinaryTree {
    private final int[] tree;
    private int used;

    public ArrayBinaryTree(int capacity) {
        tree = new int[capacity];
    }

    public void setRoot(int value) {
        tree[0] = value;
        used = Math.max(used, 1);
    }

    public int left(int i) {
        return tree[2 * i];
    }

    public int right(int i) {
        return tree[2 * i + 1];
    }

    public void setLeft(int i, int value) {
        if (2 * i + 1 > tree.length) {
            throw new IllegalArgumentException("no room for a left child of " + i);
        }
        tree[2 * i + 1] = value;
        used = Math.max(used, 2 * i + 2);
    }

    public void setRight(int i, int value) {
        if (2 * i + 2 > tree.length) {
            throw new IllegalArgumentException("no room for a right child of " + i);
        }
        tree[2 * i + 2] = value;
        used = Math.max(used, 2 * i + 3);
    }

    public int size() {
        return used;
    }
}
