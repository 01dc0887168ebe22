//! Standardized statistic `V^{-1/2}(T_n - b0)` under shrinking exponential
//! correlation, compared with the standard normal.
//!
//! `cargo run --release --example asymptotic_study -- [replicates] [side ...]`

use spatial_gof::simulation::{asymptotic_study, load_scenario};

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let replicates: usize = args.next().map_or(Ok(200), |s| s.parse())?;
    let mut sides: Vec<usize> = args.map(|s| s.parse()).collect::<Result<_, _>>()?;
    if sides.is_empty() {
        sides = vec![20, 50];
    }
    let path = std::env::var("SCENARIO").map(std::path::PathBuf::from).unwrap_or_else(|_| std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/asymptotic_shrinking.cfg"));
    let cfg = load_scenario(&path)?;
    println!("n,mean,sd,ks,b0,v");
    for s in asymptotic_study(&cfg, &sides, replicates)? {
        let m = s.mean();
        let sd = (s.standardized.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (s.standardized.len().max(2) - 1) as f64).sqrt();
        println!("{},{:.4},{:.4},{:.4},{:.5},{:.5}", s.n, m, sd, s.ks_distance(), s.b0, s.v);
    }
    Ok(())
}
