fn main() {
    std::process::exit(homperm::cli::run(std::env::args().collect()));
}
