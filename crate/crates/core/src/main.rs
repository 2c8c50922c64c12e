fn main() {
    std::process::exit(shapehess::cli::run(std::env::args_os()));
}
