fn main() {
    std::process::exit(kropina::run());
}
