//! CSV tables written by `jsdm run`. Every number is printed with nine
//! significant digits in scientific notation.

use std::io::Write;

use jsdm_core::metrics::cdf;
use jsdm_core::{BeamformerKind, CombinerKind, SweepResult};

pub const CAPACITY_FILE: &str = "capacity.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const CDF_FILE: &str = "cdf.csv";
pub const BEAMPATTERN_FILE: &str = "beampattern.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

pub fn num(x: f64) -> String {
    format!("{x:.8e}")
}

fn db(x: f64) -> f64 {
    10.0 * x.log10()
}

fn scaled(x: f64, in_db: bool) -> String {
    num(if in_db { db(x) } else { x })
}

/// One row per (φ, beamformer, combiner, user): the ergodic capacity in
/// bit/s/Hz, the design's expected reduced-dimension SINR and its nMSE
/// (empty without an estimator).
pub fn write_capacity<W: Write>(res: &SweepResult, in_db: bool, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let (sinr, nmse) = if in_db { ("expected_sinr_db", "nmse_db") } else { ("expected_sinr", "nmse") };
    w.write_record(["phi", "beamformer", "combiner", "user", "capacity", sinr, nmse])?;
    for p in res.points.iter().filter_map(|p| p.as_ref().ok()) {
        for d in &p.designs {
            for (ci, comb) in res.config.combiners.iter().enumerate() {
                for (m, cap) in d.capacity[ci].mean.iter().enumerate() {
                    w.write_record([
                        num(p.phi),
                        d.kind.label().to_string(),
                        comb.label().to_string(),
                        m.to_string(),
                        num(*cap),
                        scaled(d.expected_sinr, in_db),
                        d.nmse.map_or(String::new(), |v| scaled(v, in_db)),
                    ])?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Mean capacity over (φ, trial, user) samples and the standard error of that mean.
pub fn capacity_mean_se(res: &SweepResult, kind: BeamformerKind, comb: CombinerKind) -> Option<(f64, f64, usize)> {
    let ci = res.config.combiners.iter().position(|&c| c == comb)?;
    let samples: Vec<f64> = res
        .points
        .iter()
        .filter_map(|p| p.as_ref().ok())
        .filter_map(|p| p.design(kind))
        .flat_map(|d| d.capacity[ci].samples.iter().flatten().copied())
        .collect();
    let n = samples.len();
    if n == 0 {
        return None;
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let se = if n > 1 {
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    } else {
        0.0
    };
    Some((mean, se, n))
}

pub fn write_summary<W: Write>(res: &SweepResult, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["beamformer", "combiner", "mean_capacity", "std_err", "samples"])?;
    for &kind in &res.config.beamformers {
        for &comb in &res.config.combiners {
            if let Some((mean, se, n)) = capacity_mean_se(res, kind, comb) {
                w.write_record([
                    kind.label().to_string(),
                    comb.label().to_string(),
                    num(mean),
                    num(se),
                    n.to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Empirical `P(C_φ < c)` of the user-averaged capacity over the φ sweep on
/// a common grid of `points` values. The grid extends one step past the
/// largest sample so that every curve ends at 1.
pub fn write_cdf<W: Write>(res: &SweepResult, points: usize, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["beamformer", "combiner", "capacity", "probability"])?;
    let series: Vec<_> = res
        .config
        .beamformers
        .iter()
        .flat_map(|&k| res.config.combiners.iter().map(move |&c| (k, c)))
        .map(|(k, c)| (k, c, res.capacity_series(k, c)))
        .filter(|(_, _, s)| !s.is_empty())
        .collect();
    let all = series.iter().flat_map(|(_, _, s)| s.iter().copied());
    let lo = all.clone().fold(f64::INFINITY, f64::min);
    let hi = all.fold(f64::NEG_INFINITY, f64::max);
    if series.is_empty() {
        w.flush()?;
        return Ok(());
    }
    let step = if hi > lo { (hi - lo) / (points - 2) as f64 } else { 1.0 };
    let grid: Vec<f64> = (0..points).map(|i| lo + i as f64 * step).collect();
    for (k, c, s) in &series {
        for (x, p) in cdf(s, &grid).expect("non-empty series") {
            w.write_record([k.label().to_string(), c.label().to_string(), num(x), num(p)])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_beampattern<W: Write>(res: &SweepResult, in_db: bool, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["phi", "beamformer", "theta", if in_db { "gain_db" } else { "gain" }])?;
    for p in res.points.iter().filter_map(|p| p.as_ref().ok()) {
        for d in &p.designs {
            let Some(bp) = &d.beampattern else { continue };
            for (theta, b) in res.config.theta_grid.iter().zip(bp) {
                w.write_record([num(p.phi), d.kind.label().to_string(), num(*theta), scaled(*b, in_db)])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
