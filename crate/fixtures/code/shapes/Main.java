public class Main {
    public static void main(String[] args) {
        Shape[] shapes = {new Circle(1.5), new Rectangle(3, 4), new Triangle(5, 5, 6)};
        for (Shape s : shapes) {
            System.out.printf("%s area=%.2f perimeter=%.2f%n", s.name(), s.area(), s.perimeter());
        }
    }
}
