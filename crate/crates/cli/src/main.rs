fn main() {
    std::process::exit(glue4d_cli::run(std::env::args_os()));
}
