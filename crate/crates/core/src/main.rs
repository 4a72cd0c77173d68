fn main() -> std::process::ExitCode {
    oilcast::cli::main()
}
