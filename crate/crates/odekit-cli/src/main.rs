fn main() {
    std::process::exit(odekit_cli::run());
}
