use clap::Parser;

#[derive(Parser)]
#[command(name = "mflab", version, about = "Mixing laboratory for 2D perfect fluids")]
struct Args {}

fn main() {
    let _ = Args::parse();
}
