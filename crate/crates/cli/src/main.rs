fn main() {
    std::process::exit(schrostrip_cli::cli_main(std::env::args_os()));
}
