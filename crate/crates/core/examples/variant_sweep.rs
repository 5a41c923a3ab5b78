//! Compares few-shot counts on gold subjects of the fixture dataset. The
//! mock answers by subject, so rows only differ with a live provider.

use kbc::cli::{cmd_sweep, RunConfig};
use kbc::PromptVariant;

#[tokio::main]
async fn main() {
    let fixture = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/e2e/run.toml");
    let work = std::env::temp_dir().join(format!("kbc-sweep-{}", std::process::id()));
    let mut config = RunConfig::load(fixture).unwrap();
    config.cache_dir = work.join("cache");
    config.output_dir = work.join("out");
    cmd_sweep(&config, &[1, 4, 8], &[PromptVariant::Standard], &mut std::io::stdout())
        .await
        .unwrap();
    std::fs::remove_dir_all(work).ok();
}
