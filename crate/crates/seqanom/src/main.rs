fn main() {
    std::process::exit(seqanom::cli::main_with(std::env::args_os()));
}
