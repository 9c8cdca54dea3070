fn main() {
    std::process::exit(logarch::cli::main());
}
