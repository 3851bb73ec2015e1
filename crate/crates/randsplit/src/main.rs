fn main() {
    std::process::exit(randsplit::cli::run());
}
