fn main() {
    std::process::exit(gnr_cli::run(std::env::args_os()));
}
