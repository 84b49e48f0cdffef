fn main() {
    std::process::exit(seizure_core::cli::main(std::env::args_os()));
}
