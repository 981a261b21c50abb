fn main() {
    std::process::exit(featrank::cli::cli_main(std::env::args_os()));
}
