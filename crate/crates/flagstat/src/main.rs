use std::process;

fn main() {
    process::exit(flagstat::cli::run());
}
