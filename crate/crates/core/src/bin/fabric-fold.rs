fn main() {
    std::process::exit(fabric_fold::cli::main(std::env::args_os()));
}
