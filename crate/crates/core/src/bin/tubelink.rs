fn main() {
    std::process::exit(tubelink::cli::run(std::env::args_os()));
}
