use clap::Parser;

fn main() {
    let cli = sketchdesc::cli::Cli::parse();
    std::process::exit(sketchdesc::cli::dispatch(cli));
}
