fn main() {
    std::process::exit(rrg_cli::dispatch(std::env::args_os()));
}
