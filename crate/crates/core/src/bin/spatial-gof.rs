fn main() {
    std::process::exit(spatial_gof::cli::main_with_args(std::env::args_os()));
}
