fn main() {
    env_logger::init();
    std::process::exit(groundflow::cli::run(std::env::args_os()));
}
