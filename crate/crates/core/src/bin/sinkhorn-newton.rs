fn main() {
    std::process::exit(sinkhorn_newton::cli::run(std::env::args_os()));
}
