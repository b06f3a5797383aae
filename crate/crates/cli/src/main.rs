fn main() {
    std::process::exit(pinned_billiards_cli::run(std::env::args_os()));
}
