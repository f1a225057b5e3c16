fn main() {
    std::process::exit(fraclevel::cli::run(std::env::args_os()));
}
