//! Prices a completion run from the number of queries.

use kbc::pipeline::{estimate_cost, CostModel};

fn main() {
    let queries: u64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(48_000_000);
    let model = CostModel::new(0.02);
    let e = estimate_cost(queries, &model);
    println!("queries:            {queries}");
    println!("tokens per prompt:  {}", model.avg_prompt_tokens);
    println!("price per 1K:       ${}", model.price_per_1k_tokens);
    println!("total:              ${:.2}", e.total);
    println!("per query:          {:.3} ct", e.per_query * 100.0);
    println!("per retained:       {:.3} ct at retention {}", e.per_retained * 100.0, model.retention_rate);
}
