fn main() {
    std::process::exit(facetflow_cli::run(std::env::args_os()));
}
