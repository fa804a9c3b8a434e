fn main() -> std::process::ExitCode {
    vishsim_gateway::cli::main()
}
