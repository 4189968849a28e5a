fn main() {
    std::process::exit(nonlocal_logistic::cli::run(std::env::args_os()));
}
