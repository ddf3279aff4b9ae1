public class Triangle implements Shape {
    private final double a;
    private final double b;
    private final double c;

    public Triangle(double a, double b, double c) {
        this.a = a;
        this.b = b;
        this.c = c;
    }

    public double area() {
        double s = (a + b + c) / 2;
        return s;
    }

    public double perimeter() {
        return a + b + c;
    }

    public String name() {
        return "Triangle";
    }
}
