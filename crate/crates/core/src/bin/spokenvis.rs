fn main() {
    let code = std::panic::catch_unwind(|| spokenvis::cli::run(std::env::args_os())).unwrap_or(2);
    std::process::exit(code);
}
