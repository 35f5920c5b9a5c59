fn main() {
    std::process::exit(caging_core::cli::run(std::env::args_os()));
}
