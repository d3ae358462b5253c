fn main() {
    std::process::exit(tempotron::cli::run(std::env::args_os()));
}
