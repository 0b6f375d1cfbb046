fn main() {
    std::process::exit(hpmlmc_cli::main_with_args(std::env::args_os()));
}
