//! Rejection proportions for a bundled scenario.
//!
//! `cargo run --release --example simulate_table1 -- [config] [replicates]`

use std::path::PathBuf;

use spatial_gof::simulation::{load_scenario, run_scenario, write_results_csv};

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs/table1_s04_ae02_n225.cfg"));
    let mut cfg = load_scenario(&path)?;
    if let Some(r) = args.next() {
        cfg.replicates = r.parse()?;
    }
    let start = std::time::Instant::now();
    let result = run_scenario(&cfg)?;
    write_results_csv(&result.rows, std::io::stdout())?;
    eprintln!(
        "{} replicates, {} failed, {:.1}s",
        cfg.replicates,
        result.failures.len(),
        start.elapsed().as_secs_f64()
    );
    Ok(())
}
