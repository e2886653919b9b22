fn main() {
    std::process::exit(grover_dd::run(std::env::args_os()));
}
