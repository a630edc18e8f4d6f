fn main() {
    std::process::exit(nisynth_cli::run(std::env::args_os()).code());
}
