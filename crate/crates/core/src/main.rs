fn main() {
    std::process::exit(hypctrl::cli::run(std::env::args_os()));
}
