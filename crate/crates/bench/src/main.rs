fn main() {
    std::process::exit(cascm_bench::cli::run(std::env::args_os()));
}
