fn main() {
    std::process::exit(ledbat_sim::cli::main());
}
