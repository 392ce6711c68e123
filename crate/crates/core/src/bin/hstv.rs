fn main() {
    std::process::exit(hstv::cli::run(std::env::args_os()));
}
