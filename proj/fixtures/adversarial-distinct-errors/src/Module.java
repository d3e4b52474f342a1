package module;

public class Module {
}
