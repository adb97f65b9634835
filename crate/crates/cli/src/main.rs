fn main() { println!("pqlab"); }
