//! Calibrates and completes two relations over the bundled fixture KB with
//! the mock provider, then prints the exported statements.

use kbc::cli::{cmd_calibrate, cmd_complete, RunConfig};

#[tokio::main]
async fn main() {
    let fixture = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/e2e/run.toml");
    let work = std::env::temp_dir().join(format!("kbc-mock-pipeline-{}", std::process::id()));
    let mut config = RunConfig::load(fixture).unwrap();
    config.cache_dir = work.join("cache");
    config.output_dir = work.join("out");

    let mut stdout = std::io::stdout();
    cmd_calibrate(&config, &mut stdout).await.unwrap();
    config.relations = Some(config.output_dir.join("relations.toml"));
    let status = cmd_complete(&config, &mut stdout).await.unwrap();
    println!("exit status: {status:?}");

    for name in ["P103.tsv", "P103.needs-linking.tsv", "P178.tsv"] {
        let text = std::fs::read_to_string(config.output_dir.join(name)).unwrap();
        println!("\n{name}:\n{text}");
    }
    std::fs::remove_dir_all(work).ok();
}
