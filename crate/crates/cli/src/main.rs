fn main() {
    std::process::exit(screenkit_cli::run(std::env::args_os()));
}
