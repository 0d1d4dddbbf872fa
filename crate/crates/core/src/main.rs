fn main() {
    std::process::exit(cropgate::cli::run(std::env::args_os()));
}
