fn main() {
    std::process::exit(slmg::cli::main_exit_code());
}
