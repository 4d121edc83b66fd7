use std::io;

fn main() {
    let ctx = gitauth_cli::Context::from_env();
    let status = gitauth_cli::run(std::env::args_os(), &mut io::stdout(), &mut io::stderr(), &ctx);
    std::process::exit(status.code());
}
