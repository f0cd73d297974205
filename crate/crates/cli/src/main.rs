fn main() {
    std::process::exit(bhlab::main_with(std::env::args_os()));
}
