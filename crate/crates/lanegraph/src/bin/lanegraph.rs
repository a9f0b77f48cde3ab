fn main() {
    std::process::exit(lanegraph::harness::cli::run(std::env::args()));
}
