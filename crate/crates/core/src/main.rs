fn main() {
    std::process::exit(mafb::cli::run(std::env::args_os()));
}
