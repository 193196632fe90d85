fn main() {
    std::process::exit(bitspice::cli::run());
}
