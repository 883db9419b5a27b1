fn main() {
    std::process::exit(robinhood::cli::main());
}
