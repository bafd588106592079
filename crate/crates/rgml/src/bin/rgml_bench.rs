fn main() {
    std::process::exit(rgml::bench::cli::run_cli(std::env::args_os()));
}
