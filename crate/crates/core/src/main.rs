fn main() {
    std::process::exit(dualpress::cli::run(std::env::args_os()));
}
