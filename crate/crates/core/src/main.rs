fn main() {
    std::process::exit(orlicz_ldg::experiments::cli_main(std::env::args_os()));
}
