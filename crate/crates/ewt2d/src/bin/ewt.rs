fn main() {
    std::process::exit(ewt2d::cli::main_entry(std::env::args_os()) as i32);
}
