fn main() {
    std::process::exit(spectrum_cs::harness::cli_main(std::env::args_os()));
}
