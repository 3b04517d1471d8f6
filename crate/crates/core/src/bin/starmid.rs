fn main() {
    std::process::exit(starmid::cli::run(std::env::args_os()));
}
