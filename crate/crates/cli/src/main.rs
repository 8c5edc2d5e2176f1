fn main() {
    std::process::exit(cvxnet_cli::main_with(std::env::args_os()));
}
