fn main() -> std::process::ExitCode {
    obfugraph::cli::run(std::env::args_os())
}
