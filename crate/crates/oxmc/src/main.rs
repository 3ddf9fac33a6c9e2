fn main() {
    std::process::exit(oxmc::cli::run(std::env::args_os()));
}
