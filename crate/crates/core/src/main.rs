fn main() {
    let args: Vec<String> = std::env::args().collect();
    std::process::exit(signed_rmt::cli::run(&args));
}
