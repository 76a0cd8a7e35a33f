//! Computes pass@1 and pass@2 from a solved/unsolved table.

use feas::harness::{compute_pass_at_k, format_percent};

fn main() {
    // 18 problems, two runs each: 16 solved in the first run, 15 in the second,
    // 17 solved at least once.
    let table: Vec<Vec<bool>> = (0..18).map(|i| vec![i < 16, i < 14 || i == 16]).collect();
    let p1 = compute_pass_at_k(&table, 1).unwrap();
    let p2 = compute_pass_at_k(&table, 2).unwrap();
    println!("pass@1 {} (pass@2 {})", format_percent(p1), format_percent(p2));
    match compute_pass_at_k(&table, 3) {
        Ok(p) => println!("pass@3 {p}"),
        Err(e) => println!("pass@3: {e}"),
    }
}
