fn main() {
    std::process::exit(cytoseg::cli::run());
}
