fn main() {
    std::process::exit(starbody::cli::run(std::env::args_os()));
}
