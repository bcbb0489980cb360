fn main() {
    std::process::exit(psdselect::cli::main_entry());
}
