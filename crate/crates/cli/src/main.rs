fn main() {
    std::process::exit(relchange_cli::run(std::env::args_os()));
}
