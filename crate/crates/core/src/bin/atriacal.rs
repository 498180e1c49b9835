fn main() {
    eprintln!("atriacal CLI: not yet wired");
    std::process::exit(2);
}
