fn main() {
    std::process::exit(hardy_lab_cli::run(std::env::args_os()));
}
