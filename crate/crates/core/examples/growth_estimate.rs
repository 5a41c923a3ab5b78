//! Recomputes addable statements and relative growth from gap counts.

use kbc::pipeline::{addable_statements, relative_growth};

fn main() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/reference/completion_growth.tsv");
    let text = std::fs::read_to_string(path).unwrap();
    println!(
        "{:<22} {:>11} {:>11} {:>5} {:>11} {:>5} {:>7}",
        "relation", "current", "missing", "f", "addable", "a", "growth"
    );
    for row in text.lines().skip(1) {
        let c: Vec<&str> = row.split('\t').collect();
        let n_cur: u64 = c[1].parse().unwrap();
        let n_miss: u64 = c[2].parse().unwrap();
        let f = c[3].parse::<f64>().unwrap() / 100.0;
        let a = c[5].parse::<f64>().unwrap() / 100.0;
        let addable = addable_statements(f, n_miss);
        let growth = relative_growth(addable, a, n_cur).unwrap();
        println!("{:<22} {n_cur:>11} {n_miss:>11} {f:>5.2} {addable:>11} {a:>5.2} {growth:>6}%", c[0]);
    }
}
