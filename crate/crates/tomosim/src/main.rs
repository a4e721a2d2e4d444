fn main() {
    std::process::exit(tomosim::cli::run(std::env::args_os()));
}
