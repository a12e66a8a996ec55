fn main() {
    println!("thinfilm-mfc CLI: under construction");
}
