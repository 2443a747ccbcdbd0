fn main() {
    std::process::exit(ess_stab_cli::run(std::env::args_os()));
}
