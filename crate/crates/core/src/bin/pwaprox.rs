fn main() {
    std::process::exit(pwaprox::cli::dispatch(std::env::args_os()));
}
