//! Convergence-bound verification at desk scale: run grouped training
//! in its analysis regime (convex model, full-batch steps, full
//! participation) and audit the measured client/virtual divergences
//! against their closed-form bounds.
//!
//! ```bash
//! cargo run --release -p fglab --example verify_bounds
//! ```

use fglab::bounds::{loss_gap_bound, verify_bounds, BoundsConfig};
use fglab::datagen::{digits_pool, partition_noniid};
use fglab::models::ModelSpec;
use fglab::numkit::RngStream;

fn main() -> Result<(), fglab::Error> {
    let (features, labels) = digits_pool(9 * 50, &mut RngStream::new(31, 0));
    let dataset = partition_noniid(&features, &labels, 9, 2, &mut RngStream::new(31, 1))?;
    let spec = ModelSpec::mclr(64, 10);

    let report = verify_bounds(
        &dataset,
        &spec,
        &BoundsConfig {
            num_groups: 3,
            rounds: 10,
            local_epochs: 20,
            eta: None, // 0.5 / smoothness bound
            eta_g: 0.0,
            slack_rel: 1e-9,
        },
    )?;

    let c = &report.constants;
    println!("estimated constants:");
    println!("  smoothness bound  {:.4}", c.l_hat);
    println!("  continuity bound  {:.4}", c.m_hat);
    println!("  divergence        {:.6} (aggregate)", c.delta);
    println!("  step size         {:.6} (eta * L = {:.3})", c.eta, c.eta * c.l_hat);
    for d in c.delta_kg.iter().take(4) {
        println!("  client {} in group {}: delta {:.6}", d.client, d.group, d.delta);
    }

    // Tightness at the synchronization epoch.
    let mut worst_ratio: f64 = 0.0;
    for row in report.per_client.iter().filter(|r| r.epoch == c.local_epochs) {
        if row.bound > 0.0 {
            worst_ratio = worst_ratio.max(row.measured / row.bound);
        }
    }
    println!("\nchecks: {} per-client rows, {} aggregate rows, {} loss-gap rows",
        report.per_client.len(), report.aggregate.len(), report.loss_gaps.len());
    println!("violations: {} (recursion: {})", report.violations, report.recursion_violations);
    println!("tightest end-of-round measured/bound ratio: {worst_ratio:.4}");
    println!(
        "closed-form loss gap without/with exchange term: {:.6} / {:.6}",
        loss_gap_bound(c, false),
        loss_gap_bound(c, true)
    );
    Ok(())
}
