fn main() {
    std::process::exit(nowpac::cli::run(std::env::args()));
}
