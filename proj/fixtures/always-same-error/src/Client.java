package client;

public class Client {
    private final LegacyClient delegate = new LegacyClient();
}
