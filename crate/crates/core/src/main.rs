fn main() {
    std::process::exit(abplab::cli::run(std::env::args_os()));
}
