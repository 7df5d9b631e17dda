fn main() {
    std::process::exit(ffcn::cli::run());
}
