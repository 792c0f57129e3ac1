//! How close is the decomposed measure to the full one? Pre-train 60
//! clients, compute every pairwise EDC and MADC value, and report the
//! Pearson correlation between them. EDC only needs cosines against
//! five decomposed directions instead of all 1770 client pairs.
//!
//! ```bash
//! cargo run --release -p fglab --example edc_vs_madc
//! ```

use fglab::clustering::{edc, madc_matrix, similarity_matrix};
use fglab::datagen::{digits_pool, partition_noniid};
use fglab::fedgroup::{group_cold_start, Ablation, GroupingConfig, Measure};
use fglab::flcore::TrainParams;
use fglab::models::ModelSpec;
use fglab::numkit::{pearson, ParamVector, RngStream, UpdateMatrix};

fn main() -> Result<(), fglab::Error> {
    let (features, labels) = digits_pool(8_000, &mut RngStream::new(55, 0));
    let dataset = partition_noniid(&features, &labels, 100, 2, &mut RngStream::new(55, 1))?;
    let spec = ModelSpec::mclr(64, 10);
    let w0 = ParamVector::zeros(spec.parameter_count());
    let cold = group_cold_start(
        &dataset,
        &spec,
        &w0,
        &GroupingConfig {
            num_groups: 5,
            pretrain_scale: 12,
            measure: Measure::Edc,
            eta_g: 0.0,
            ablation: Ablation::None,
        },
        &TrainParams {
            local_epochs: 20,
            batch_size: 10,
            eta: 0.03,
            mu: 0.0,
        },
        &RngStream::root(555),
    )?;

    let updates = UpdateMatrix::new(cold.pretrained.iter().map(|(_, d)| d.clone()).collect())?;
    let embedding = edc(&updates, 5)?;
    let madc = madc_matrix(&similarity_matrix(&updates)?)?;

    let n = updates.n();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            xs.push(embedding.pairwise.get(i, j));
            ys.push(madc.get(i, j));
        }
    }
    println!("{} pre-trained clients, {} pairs", n, xs.len());
    println!("pearson r(EDC, MADC) = {:.4}", pearson(&xs, &ys)?);

    // A coarse scatter, characters per 2D bin.
    let (xmax, ymax) = (
        xs.iter().cloned().fold(0.0f64, f64::max),
        ys.iter().cloned().fold(0.0f64, f64::max),
    );
    let mut grid = [[0usize; 40]; 12];
    for (x, y) in xs.iter().zip(&ys) {
        let col = ((x / xmax) * 39.0) as usize;
        let row = ((y / ymax) * 11.0) as usize;
        grid[11 - row][col] += 1;
    }
    println!("\nmadc");
    for row in grid {
        let line: String = row
            .iter()
            .map(|&c| match c {
                0 => ' ',
                1..=2 => '.',
                3..=8 => 'o',
                _ => '#',
            })
            .collect();
        println!("| {line}");
    }
    println!("+{}> edc", "-".repeat(41));
    Ok(())
}
