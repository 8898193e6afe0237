fn main() {
    std::process::exit(codraw::cli::run(std::env::args_os()));
}
