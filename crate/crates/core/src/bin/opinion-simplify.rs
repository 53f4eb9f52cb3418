fn main() {
    std::process::exit(opinion_simplify::cli::run(std::env::args_os()));
}
