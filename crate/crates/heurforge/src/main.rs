fn main() {
    std::process::exit(heurforge::cli::run(std::env::args()));
}
