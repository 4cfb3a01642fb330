fn main() {
    env_logger::init();
    std::process::exit(honewton_cli::run(std::env::args_os().collect()));
}
