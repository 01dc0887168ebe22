//! Local linear surface on a noisy grid, next to the truth.
//!
//! `cargo run --release --example local_linear`

use spatial_gof::kernels::{BandwidthMatrix, KernelSpec};
use spatial_gof::rng::{rng_from_seed, standard_normals};
use spatial_gof::smoothing::{local_linear_surface, SpatialDataset};

fn truth(x: f64, y: f64) -> f64 {
    1.0 + x + (3.0 * y).sin()
}

fn main() -> anyhow::Result<()> {
    let side = 20;
    let noise = standard_normals(&mut rng_from_seed(11), side * side);
    let mut locations = Vec::new();
    let mut z = Vec::new();
    for i in 0..side {
        for j in 0..side {
            let (x, y) = (i as f64 / (side - 1) as f64, j as f64 / (side - 1) as f64);
            locations.extend([x, y]);
            z.push(truth(x, y) + 0.2 * noise[i * side + j]);
        }
    }
    let data = SpatialDataset::new(2, locations, z)?;
    let h = BandwidthMatrix::diagonal_from(vec![0.25, 0.25])?;
    let points: Vec<f64> = (0..5).flat_map(|i| [0.1 + 0.2 * i as f64, 0.5]).collect();
    let surface = local_linear_surface(&data, &KernelSpec::triweight(2), &h, &points)?;

    println!("x,y,estimate,truth");
    for (p, v) in points.chunks(2).zip(&surface.values) {
        println!("{},{},{:.4},{:.4}", p[0], p[1], v, truth(p[0], p[1]));
    }
    Ok(())
}
