fn main() {
    std::process::exit(chsh_kyber::cli::cli_main(std::env::args_os()));
}
