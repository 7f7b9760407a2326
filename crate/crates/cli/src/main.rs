fn main() {
    std::process::exit(vlqfb_cli::app::run(std::env::args_os()));
}
