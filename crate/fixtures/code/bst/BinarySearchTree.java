public class BinarySearchTree {
    private static class Node {
        int value;
        Node left;
        Node right;

        Node(int value) {
            this.value = value;
        }
    }

    private Node root;

    public void insert(int value) {
        root = insert(root, value);
    }

    private Node insert(Node node, int value) {
        if (node == null) {
            return new Node(value);
        }
        if (value < node.value) {
            node.left = insert(node.left, value);
        } else if (value > node.value) {
            node.right = insert(node.right, value);
        }
        return node;
    }

    public String inorder() {
        StringBuilder sb = new StringBuilder();
        inorder(root, sb);
        return sb.toString().trim();
    }

    private void inorder(Node node, StringBuilder sb) {
        if (node != null) {
            inorder(node.left, sb);
            sb.append(node.value).append(' ');
            inorder(node.right, sb);
        }
    }

    public String preorder() {
        StringBuilder sb = new StringBuilder();
        preorder(root, sb);
        return sb.toString().trim();
    }

    private void preorder(Node node, StringBuilder sb) {
        if (node != null) {
            sb.append(node.value).append(' ');
            preorder(node.left, sb);
            preorder(node.right, sb);
        }
    }

    public int minimum() {
        if (root == null) {
            throw new IllegalStateException("empty tree");
        }
        while (root.left != null && root.left.left != null) {
            root.left = root.left.left;
        }
        return root.left == null ? root.value : root.left.value;
    }

    public int maximum() {
        if (root == null) {
            throw new IllegalStateException("empty tree");
        }
        while (root.right != null && root.right.right != null) {
            root.right = root.right.right;
        }
        return root.right == null ? root.value : root.right.value;
    }
}
