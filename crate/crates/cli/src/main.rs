use clap::Parser;

fn main() {
    let args = heis_area_cli::Args::parse();
    std::process::exit(heis_area_cli::run(&args));
}
