use laserprof_core::GrrSimConfig;

use super::with_pool;
use crate::args::BenchArgs;
use crate::bench::{self, GRR_BAND_UM, TABLE2_MEAN_UM};
use crate::config::{self, BenchConfig};
use crate::io;
use crate::Status;

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

pub fn run(args: &BenchArgs) -> anyhow::Result<Status> {
    let cfg: BenchConfig = config::load(args.config.as_deref())?;
    let seed = args.seed.or(cfg.seed).unwrap_or(0);
    let jobs = args.jobs.or(cfg.jobs);
    let out = args.out.as_deref();

    if args.table1 {
        let r = bench::table1()?;
        println!("Step heights (tolerance {:.3} mm)", r.tolerance_mm);
        println!(
            "{:<12} {:>13} {:>12} {:>13}  result",
            "profile", "reference_mm", "measured_mm", "deviation_mm"
        );
        for row in &r.rows {
            println!(
                "{:<12} {:>13.3} {:>12.3} {:>13.3}  {}",
                row.profile,
                row.reference_mm,
                row.measured_mm,
                row.deviation_mm,
                verdict(row.pass)
            );
        }
        println!(
            "max |deviation| {:.4} mm: {}",
            r.max_abs_deviation_mm,
            verdict(r.pass)
        );
        if out.is_some() {
            io::write_csv(io::open_output(out)?, &r.rows)?;
        }
    } else if args.table2 {
        let frames = args.frames.or(cfg.frames).unwrap_or(200);
        let r = with_pool(jobs, || bench::table2(frames, seed))??;
        println!("Diffusion error per material ({frames} frames each, tolerance ±15%)");
        println!(
            "{:<32} {:>11} {:>12} {:>7}  result",
            "material", "injected_um", "recovered_um", "ratio"
        );
        for row in &r.rows {
            println!(
                "{:<32} {:>11.2} {:>12.2} {:>7.3}  {}",
                row.material,
                row.injected_um,
                row.recovered_um,
                row.ratio,
                verdict(row.pass)
            );
        }
        println!(
            "mean {:.2} um vs {TABLE2_MEAN_UM} um (±10%): {}; overall {}",
            r.mean_recovered_um,
            verdict(r.mean_pass),
            verdict(r.pass)
        );
        if out.is_some() {
            io::write_csv(io::open_output(out)?, &r.rows)?;
        }
    } else {
        let seeds = args.seeds.or(cfg.seeds).unwrap_or(100);
        let r = with_pool(jobs, || bench::grr_band(seeds, seed, &GrrSimConfig::default()))??;
        let rr: Vec<f64> = r.rows.iter().map(|x| x.total_rr_um).collect();
        let mean = rr.iter().sum::<f64>() / rr.len() as f64;
        println!(
            "Pin-gauge R&R over {seeds} seeds: mean total R&R {mean:.2} um, {:.0}% in [{}, {}] um, \
             max identity error {:.2e}: {}",
            100.0 * r.fraction_in_band,
            GRR_BAND_UM.0,
            GRR_BAND_UM.1,
            r.max_identity_error,
            verdict(r.pass)
        );
        if out.is_some() {
            io::write_csv(io::open_output(out)?, &r.rows)?;
        }
    }
    Ok(Status::Ok)
}
