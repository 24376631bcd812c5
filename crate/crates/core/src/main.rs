fn main() {
    std::process::exit(cartan_lab::run_cli(std::env::args_os()));
}
