fn main() {
    std::process::exit(oceanflow::cli::run(std::env::args_os()));
}
