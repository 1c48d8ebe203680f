fn main() {
    std::process::exit(teachkit::cli::run(std::env::args_os()));
}
