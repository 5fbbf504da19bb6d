fn main() {
    std::process::exit(mechspde::cli::run(std::env::args_os()));
}
