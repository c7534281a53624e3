fn main() {
    std::process::exit(agielo_cli::run(std::env::args_os()));
}
