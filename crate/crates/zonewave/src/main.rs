fn main() {
    std::process::exit(zonewave::cli::main_from_args(std::env::args_os()));
}
