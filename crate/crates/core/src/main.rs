fn main() {
    std::process::exit(tubelab::cli::run(std::env::args_os()));
}
