fn main() {
    std::process::exit(gemset_cli::run(std::env::args_os()));
}
