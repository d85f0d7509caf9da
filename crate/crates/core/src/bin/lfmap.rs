fn main() {
    std::process::exit(latent_fmaps::cli::run(std::env::args_os()));
}
