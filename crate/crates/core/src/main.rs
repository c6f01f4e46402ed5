fn main() -> std::process::ExitCode {
    miattn::cli::main_with_args(std::env::args_os())
}
