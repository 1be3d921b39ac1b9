fn main() {
    std::process::exit(intermittent_runner::run(std::env::args_os()));
}
