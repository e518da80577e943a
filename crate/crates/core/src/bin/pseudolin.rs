fn main() {
    std::process::exit(pseudolin::cli::run());
}
