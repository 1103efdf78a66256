fn main() {
    std::process::exit(coherent_weyl::cli::run(std::env::args_os()));
}
