fn main() {
    std::process::exit(paramcmp::cli::main(std::env::args_os()));
}
