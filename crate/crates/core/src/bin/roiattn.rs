fn main() {
    std::process::exit(roi_attention::cli::main());
}
