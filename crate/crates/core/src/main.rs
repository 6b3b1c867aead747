fn main() {
    std::process::exit(insole_pose::cli::run_cli(std::env::args_os()));
}
