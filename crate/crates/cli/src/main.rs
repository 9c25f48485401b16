fn main() {
    std::process::exit(screme_cli::run(std::env::args_os()));
}
