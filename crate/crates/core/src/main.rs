fn main() {
    std::process::exit(oscillab::cli::run(std::env::args_os()));
}
