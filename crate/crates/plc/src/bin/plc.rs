fn main() {
    env_logger::init();
    std::process::exit(plc::cli::run(std::env::args_os()));
}
