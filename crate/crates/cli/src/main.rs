fn main() {
    std::process::exit(valconf::run(std::env::args_os()));
}
