fn main() {
    std::process::exit(monosplat::cli::run(std::env::args_os()));
}
