fn main() {
    std::process::exit(glp_ksample::cli::main_with_args(std::env::args_os()));
}
