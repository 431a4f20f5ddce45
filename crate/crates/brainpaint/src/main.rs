use clap::Parser;

fn main() {
    let cli = brainpaint::cli::Cli::parse();
    let code = brainpaint::cli::run(cli, &mut std::io::stdout(), &mut std::io::stderr());
    std::process::exit(code);
}
