fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let code = pqah::cli::main_with_args(std::env::args_os());
    std::process::exit(code as i32);
}
