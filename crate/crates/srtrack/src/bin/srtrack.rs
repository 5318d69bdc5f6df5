fn main() {
    std::process::exit(srtrack::cli::run(std::env::args()));
}
