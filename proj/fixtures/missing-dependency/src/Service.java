package service;

public class Service {
    public int port() {
        return 8080;
    }
}
