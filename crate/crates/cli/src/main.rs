fn main() {
    std::process::exit(pddlforge_cli::run(std::env::args_os()));
}
