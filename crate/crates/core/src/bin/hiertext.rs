fn main() {
    std::process::exit(hiertext::cli::run(std::env::args_os()));
}
