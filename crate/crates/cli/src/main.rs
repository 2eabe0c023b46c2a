fn main() -> std::process::ExitCode {
    std::process::ExitCode::from(artqa_cli::run(std::env::args_os()))
}
