fn main() {
    std::process::exit(eventmob::cli::execute(std::env::args_os()));
}
