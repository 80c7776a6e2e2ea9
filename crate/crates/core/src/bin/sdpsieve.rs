fn main() {
    std::process::exit(sdpsieve::cli::main_with_args(std::env::args()));
}
