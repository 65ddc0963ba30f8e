fn main() {
    std::process::exit(bdchain_core::cli::run(std::env::args_os()));
}
