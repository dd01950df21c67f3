fn main() -> std::process::ExitCode {
    fairslice::cli::main()
}
