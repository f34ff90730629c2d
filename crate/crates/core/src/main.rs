fn main() {
    std::process::exit(rabi_squeeze::cli::run(std::env::args_os()));
}
