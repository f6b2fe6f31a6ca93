fn main() {
    std::process::exit(spckd::cli::run_command(std::env::args_os()));
}
