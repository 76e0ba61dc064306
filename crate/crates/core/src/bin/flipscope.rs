fn main() {
    std::process::exit(flipscope::cli::run(std::env::args_os()));
}
