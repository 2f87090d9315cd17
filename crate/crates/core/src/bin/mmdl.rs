fn main() -> std::process::ExitCode {
    mmdl::cli::main()
}
