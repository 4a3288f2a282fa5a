use std::io;

fn main() {
    let env: Vec<(String, String)> = std::env::vars().collect();
    let code = stopgame::cli::run(
        std::env::args_os(),
        &env,
        &mut io::stdout().lock(),
        &mut io::stderr().lock(),
    );
    std::process::exit(code);
}
