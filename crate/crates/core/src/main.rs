use std::io;

fn main() {
    let code = syspolar::cli::run(
        std::env::args().collect(),
        &mut io::stdout().lock(),
        &mut io::stderr().lock(),
    );
    std::process::exit(code);
}
