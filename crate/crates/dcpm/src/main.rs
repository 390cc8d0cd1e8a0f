fn main() {
    std::process::exit(dcpm::harness::cli::run());
}
