public class ArrayBinaryTreeSolution {
    private final int[] tree;

    public ArrayBinaryTreeSolution(int capacity) {
        tree = new int[capacity];
    }

    private static int leftIndex(int i) {
        return 2 * i + 1;
    }

    private static int rightIndex(int i) {
        return 2 * i + 2;
    }

    public int left(int i) {
        return tree[leftIndex(i)];
    }

    public int right(int i) {
        return tree[rightIndex(i)];
    }

    public void setLeft(int i, int value) {
        if (leftIndex(i) >= tree.length) {
            throw new IllegalArgumentException("no room for a left child of " + i);
        }
        tree[leftIndex(i)] = value;
    }

    public void setRight(int i, int value) {
        if (rightIndex(i) >= tree.length) {
            throw new IllegalArgumentException("no room for a right child of " + i);
        }
        tree[rightIndex(i)] = value;
    }
}
