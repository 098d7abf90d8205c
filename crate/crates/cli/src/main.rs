fn main() {
    std::process::exit(contact_kam::execute(std::env::args_os()));
}
