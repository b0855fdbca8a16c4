fn main() {
    std::process::exit(kfmot::cli::main(std::env::args_os().collect()));
}
