//! p-values of the test across a grid of diagonal bandwidths for a dataset
//! file (a simulated one when no path is given).
//!
//! `cargo run --release --example significance_trace -- [data.csv] [h1min:h1max:steps,h2min:h2max:steps]`

use spatial_gof::cli::parse_bandwidth_grid;
use spatial_gof::goftest::{significance_trace, write_trace_csv, QuadratureGrid, TestConfig, WeightFunction};
use spatial_gof::io::read_dataset_file;
use spatial_gof::kernels::KernelSpec;
use spatial_gof::simulation::{generate_field, parse_scenario};
use spatial_gof::trend::TrendModel;
use spatial_gof::variography::VariogramFamily;

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let (data, default_grid) = match args.next() {
        Some(path) => (read_dataset_file(path.as_ref())?, "300:500:5,150:300:4"),
        None => {
            let scenario = parse_scenario(
                "seed = 8\ntrend = \"m1\"\nc = 0.0\nsigma = 0.4\nrange = 0.2\nbandwidths = [[0.8, 0.8]]\n\
                 [design]\nkind = \"regular-grid\"\nside = 15\n",
            )?;
            (generate_field(&scenario, 0)?.dataset, "0.6:1.0:3,0.6:1.0:3")
        }
    };
    let grid = parse_bandwidth_grid(&args.next().unwrap_or_else(|| default_grid.to_string()))?;
    let quad = QuadratureGrid::bounding(2, data.locations(), 30)?;
    let config = TestConfig {
        replicates: 200,
        ..TestConfig::default()
    };
    let trace = significance_trace(
        &data,
        &TrendModel::linear(2),
        VariogramFamily::Spherical,
        &KernelSpec::triweight(2),
        &grid,
        &WeightFunction::ConstantOne,
        &quad,
        &config,
        2024,
    )?;
    write_trace_csv(&trace, std::io::stdout())?;
    Ok(())
}
