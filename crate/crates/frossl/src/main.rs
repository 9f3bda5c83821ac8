fn main() { std::process::exit(frossl::cli::run()); }
