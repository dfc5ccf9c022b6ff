fn main() {
    std::process::exit(synrisk_core::harness::cli::main());
}
