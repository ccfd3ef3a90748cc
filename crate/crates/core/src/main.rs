fn main() {
    std::process::exit(psdsketch::cli::cli_main(std::env::args_os()));
}
