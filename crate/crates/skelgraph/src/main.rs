fn main() {
    std::process::exit(skelgraph::cli::run(std::env::args_os()));
}
