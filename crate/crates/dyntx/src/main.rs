fn main() {
    std::process::exit(dyntx::cli::run());
}
