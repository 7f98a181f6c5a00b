fn main() {
    std::process::exit(pivnet_cli::run(std::env::args_os()));
}
