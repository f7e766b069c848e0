fn main() {
    std::process::exit(orthoreg_cli::run(std::env::args_os()));
}
