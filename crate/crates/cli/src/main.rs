use clap::Parser;

fn main() {
    let cli = boxlab_cli::Cli::parse();
    let code = match boxlab_cli::run(&cli, &mut std::io::stdout().lock()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    std::process::exit(code);
}
