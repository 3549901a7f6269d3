fn main() {
    std::process::exit(gnslab::cli::run(std::env::args_os()));
}
