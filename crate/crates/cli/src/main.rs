fn main() {
    std::process::exit(nntt_cli::run(std::env::args_os()));
}
