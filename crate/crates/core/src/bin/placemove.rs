fn main() {
    std::process::exit(placemove::cli::run(std::env::args_os()));
}
