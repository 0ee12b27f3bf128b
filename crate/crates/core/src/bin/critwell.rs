fn main() {
    std::process::exit(critwell::cli::run(std::env::args_os()));
}
