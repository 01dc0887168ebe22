//! Empirical semivariogram of simulated exponential errors and weighted
//! least squares fits of each variogram family.
//!
//! `cargo run --release --example variogram_fit`

use spatial_gof::simulation::{generate_field, parse_scenario};
use spatial_gof::trend::{ols_fit, TrendModel};
use spatial_gof::variography::{
    default_max_lag, empirical_semivariogram, fit_variogram_wls, initial_model, VariogramFamily, DEFAULT_BINS,
};

const SCENARIO: &str = r#"
seed = 5
trend = "m1"
c = 0.0
sigma = 0.4
range = 0.2
bandwidths = [[0.8, 0.8]]

[design]
kind = "regular-grid"
side = 20
"#;

fn main() -> anyhow::Result<()> {
    let data = generate_field(&parse_scenario(SCENARIO)?, 0)?.dataset;
    let fitted = ols_fit(&TrendModel::linear(2), &data)?.fitted(data.locations());
    let residuals: Vec<f64> = data.responses().iter().zip(&fitted).map(|(z, m)| z - m).collect();
    let max_lag = default_max_lag(2, data.locations());
    let emp = empirical_semivariogram(2, data.locations(), &residuals, DEFAULT_BINS, max_lag)?;
    emp.write_csv(std::io::stdout())?;

    println!();
    println!("family,nugget,partial_sill,range,objective");
    for family in VariogramFamily::ALL {
        let fit = fit_variogram_wls(&emp, family, &initial_model(&emp, family)?)?;
        let m = fit.model;
        println!("{family},{:.4},{:.4},{:.4},{:.4}", m.nugget, m.partial_sill, m.range, fit.objective);
    }
    Ok(())
}
