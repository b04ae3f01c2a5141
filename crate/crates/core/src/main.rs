fn main() {
    std::process::exit(kan_lmm::cli::run(std::env::args_os()));
}
