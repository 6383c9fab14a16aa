fn main() {
    std::process::exit(softcap::cli::run());
}
