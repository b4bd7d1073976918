fn main() {
    std::process::exit(rocpca::cli::run(std::env::args_os()));
}
