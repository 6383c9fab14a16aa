//! One trajectory with competing clocks, its TSV dump and path integrals.

use softcap::models::{double_well_chain, DoubleWellSpec};
use softcap::sim::{simulate, time_average, PathIntegral, Start};

fn main() -> softcap::error::Result<()> {
    let (chain, cover) = double_well_chain(&DoubleWellSpec::canonical(2.0))?;
    let rec = simulate(&chain, &cover, 1e-3, 1e-3, &Start::State(2), f64::INFINITY, 1)?;
    println!("{} segments, ended by {} at t={:.3}", rec.segments.len(), rec.termination.label(), rec.total_time);
    println!("local times R={:.3} S={:.3} both={:.3}", rec.local_time_r, rec.local_time_s, rec.local_time_both);
    for line in rec.to_tsv(&chain).lines().take(5) {
        println!("  {line}");
    }

    let f = cover.r_minus_s().indicator();
    let path = PathIntegral::new(&rec.segments);
    let prefix = path.prefix(&f);
    println!("time in R\\S = {:.3}", path.integral(&prefix, &f, 0.0, path.total()));
    if rec.total_time > 1.0 {
        println!("average over the first unit of time {:.3}", time_average(&rec, &f, 1.0, 0.0)?);
    }
    Ok(())
}
