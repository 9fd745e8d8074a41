fn main() {
    std::process::exit(osmoid_cli::run(std::env::args_os()));
}
