fn main() {
    std::process::exit(gevcalc::cli::run());
}
