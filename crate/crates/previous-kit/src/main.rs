fn main() {
    std::process::exit(previous_kit::run());
}
