fn main() {
    std::process::exit(toporag::cli::run());
}
