package app;

public class App {
    public static String greet(String name) {
        return "Hello, " + name;
    }
}
