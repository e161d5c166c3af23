fn main() {
    std::process::exit(spincool::cli::dispatch(std::env::args_os()));
}
