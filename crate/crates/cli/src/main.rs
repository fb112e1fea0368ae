fn main() {
    std::process::exit(tcm_icp_cli::run(std::env::args_os()));
}
