fn main() {
    std::process::exit(seqgauss::harness::cli_main());
}
