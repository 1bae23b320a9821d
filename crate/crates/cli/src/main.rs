fn main() {
    std::process::exit(selinf_cli::main_with_args(std::env::args_os()));
}
