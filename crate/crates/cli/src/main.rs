fn main() {
    std::process::exit(prsum_cli::run(std::env::args_os()));
}
