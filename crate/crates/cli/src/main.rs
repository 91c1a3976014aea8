fn main() {
    std::process::exit(liref_cli::run(std::env::args_os()));
}
