fn main() {
    std::process::exit(chaoscert::cli::run(std::env::args_os()));
}
