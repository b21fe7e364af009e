fn main() -> std::process::ExitCode {
    croi::cli::main()
}
