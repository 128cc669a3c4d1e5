fn main() {
    std::process::exit(brnn::cli::run(std::env::args_os()));
}
