fn main() {
    std::process::exit(bellcat::cli::run());
}
