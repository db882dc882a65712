//! Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
//!
//! Run alone with `cargo test --release -p jsdm-cli --test acceptance`.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use num_complex::Complex64;
use rand::seq::index::sample as sample_indices;
use rand::Rng;

use jsdm_cli::{run, table1_scaled, RunOptions};
use jsdm_core::chanest::{
    active_delays_per_user, apply_estimator, build_pilots, effective_channel_covariance, lmmse_estimator, ls_estimator,
    nmse, receive_pilots, stack_effective_channel,
};
use jsdm_core::channel::{build_covariances, ChannelSampler};
use jsdm_core::constrained::{
    compensation_step, dynamic_connection_observed, fixed_subarray_observed, interlaced_mask, ordered_mask,
    pe_am_observed, phase_extraction, rotation_step, PhaseInit,
};
use jsdm_core::digital::{effective_channel, lmmse_combiners, zf_combiners};
use jsdm_core::geb::{compute_geb, reduced_mutual_info};
use jsdm_core::linksim::{
    build_combiners, bussgang_reports, normalized_dft_rows, simulate_block, BlockConfig, BussgangAccumulator,
    GroupReceiver,
};
use jsdm_core::metrics::{beampattern, linear_grid, phi_sweep, theta_grid};
use jsdm_core::numerics::{c, identity, log2_det_hpd, orthonormalize, trace};
use jsdm_core::pipeline::design_beamformer;
use jsdm_core::rng::{complex_gaussian, derive_seed, rng_from_seed, unit_phase, SimRng};
use jsdm_core::statistics::{expected_sinr, group_statistics, reduce};
use jsdm_core::{
    BeamformerKind, CMat, ChannelRealization, CombinerKind, DesignSettings, GroupProfile, GroupStatistics, Mpc,
    Scenario, SweepResult, UserProfile,
};

type Outcome = (bool, String);

fn db(x: f64) -> f64 {
    10f64.powf(x / 10.0)
}

fn gaussian(rng: &mut SimRng, r: usize, cols: usize) -> CMat {
    CMat::from_fn(r, cols, |_, _| complex_gaussian(rng, 1.0))
}

fn random_orthonormal(rng: &mut SimRng, m: usize, d: usize) -> CMat {
    orthonormalize(&gaussian(rng, m, d)).unwrap()
}

fn random_unit_modulus(rng: &mut SimRng, m: usize, d: usize) -> CMat {
    let amp = 1.0 / (m as f64).sqrt();
    CMat::from_fn(m, d, |_, _| unit_phase(rng) * amp)
}

/// Three groups of two users with random clusters on an 8-tap channel.
fn random_scenario(rng: &mut SimRng, m: usize) -> Scenario {
    let taps = 8;
    let groups = (0..3)
        .map(|_| {
            let n_mpc = rng.random_range(1..=3);
            let delays = sample_indices(rng, taps, n_mpc).into_vec();
            let users = (0..2)
                .map(|_| UserProfile {
                    gain: rng.random_range(0.5..2.0),
                    mpcs: delays
                        .iter()
                        .map(|&delay| Mpc {
                            delay,
                            aoa_deg: rng.random_range(-60.0..60.0),
                            spread_deg: rng.random_range(1.0..6.0),
                        })
                        .collect(),
                })
                .collect();
            GroupProfile {
                users,
                rf_chains: rng.random_range(1..=4),
                symbol_energy: db(rng.random_range(0.0..40.0)),
                mobile: false,
            }
        })
        .collect();
    Scenario { antennas: m, taps, noise_power: 1.0, groups, phi_deg: 0.0 }
}

/// Reference layout at 32 antennas, shifted to `phi`.
fn desk(d: usize, e1_db: f64, ei_db: f64, phi: f64) -> Scenario {
    Scenario::table1(32, [d; 4], [db(e1_db), db(ei_db), db(ei_db), db(ei_db)]).with_phi(phi)
}

struct Designed {
    scn: Scenario,
    stats: GroupStatistics,
    analogs: Vec<(BeamformerKind, CMat)>,
    sampler: ChannelSampler,
}

fn designed(scn: Scenario, kinds: &[BeamformerKind]) -> Designed {
    let cov = build_covariances(&scn).unwrap();
    let stats = group_statistics(&cov, &scn, 0).unwrap();
    let geb = compute_geb(&stats, scn.groups[0].rf_chains).unwrap();
    let settings = DesignSettings { seed: 7, ..DesignSettings::default() };
    let analogs =
        kinds.iter().map(|&k| (k, design_beamformer(k, &scn, 0, &stats, &geb, &settings).unwrap().analog)).collect();
    Designed { sampler: ChannelSampler::new(&cov).unwrap(), scn, stats, analogs }
}

const FULL: [BeamformerKind; 4] = [BeamformerKind::Geb, BeamformerKind::Dft, BeamformerKind::Pe, BeamformerKind::PeAm];

/// `log2 det(S^H (R_s + R_η) S) − log2 det(S^H R_η S)` evaluated on `S` as given.
fn raw_cost(stats: &GroupStatistics, s: &CMat) -> f64 {
    let sh = s.adjoint();
    let total = &sh * (&stats.r_s + &stats.r_eta) * s;
    let eta = &sh * &stats.r_eta * s;
    log2_det_hpd(&total).unwrap() - log2_det_hpd(&eta).unwrap()
}

fn criterion_1() -> Outcome {
    let mut rng = rng_from_seed(101);
    let mut worst = f64::INFINITY;
    for _ in 0..10 {
        let scn = random_scenario(&mut rng, 32);
        let cov = build_covariances(&scn).unwrap();
        let stats = group_statistics(&cov, &scn, 0).unwrap();
        let d = scn.groups[0].rf_chains;
        let geb = compute_geb(&stats, d).unwrap();
        let best = reduced_mutual_info(&stats, &geb.s).unwrap();
        for t in 0..1000 {
            // Haar draws and, every other trial, small tilts of the GEB span
            let q = if t % 2 == 0 {
                random_orthonormal(&mut rng, 32, d)
            } else {
                let eps = 10f64.powi(-(1 + t % 8));
                orthonormalize(&(&geb.s + gaussian(&mut rng, 32, d) * c(eps))).unwrap()
            };
            worst = worst.min(best - reduced_mutual_info(&stats, &q).unwrap());
        }
    }
    (worst >= -1e-9, format!("min margin over 10 x 1000 random and perturbed beamformers {worst:.3e} bit"))
}

/// `U diag(σ) V^H` with `σ_0 = 1`, `σ_{d-1} = 1e4` and log-uniform values between.
fn conditioned_factor(rng: &mut SimRng, d: usize) -> CMat {
    let u = random_orthonormal(rng, d, d);
    let v = random_orthonormal(rng, d, d);
    let mut sigma = identity(d);
    for i in 1..d {
        sigma[(i, i)] = c(if i == d - 1 { 1e4 } else { 10f64.powf(rng.random_range(0.0..4.0)) });
    }
    u * sigma * v.adjoint()
}

fn criterion_2() -> Outcome {
    let mut rng = rng_from_seed(202);
    let grid = theta_grid(0.25);
    let (mut cost_dev, mut pattern_dev) = (0.0f64, 0.0f64);
    for _ in 0..3 {
        let mut scn = random_scenario(&mut rng, 32);
        scn.groups[0].rf_chains = 4;
        let cov = build_covariances(&scn).unwrap();
        let stats = group_statistics(&cov, &scn, 0).unwrap();
        let geb = compute_geb(&stats, 4).unwrap();
        let pe = phase_extraction(&geb.s).effective();
        for s in [geb.s.clone(), pe] {
            let base = raw_cost(&stats, &s);
            let base_pattern = beampattern(&s, &grid).unwrap();
            for _ in 0..100 {
                let sa = &s * conditioned_factor(&mut rng, 4);
                let rel = |x: f64| (x - base).abs() / base.abs();
                cost_dev = cost_dev.max(rel(raw_cost(&stats, &sa))).max(rel(reduced_mutual_info(&stats, &sa).unwrap()));
                let p = beampattern(&sa, &grid).unwrap();
                let dev = p.iter().zip(&base_pattern).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                pattern_dev = pattern_dev.max(dev);
            }
        }
    }
    (
        cost_dev <= 1e-6 && pattern_dev <= 1e-8,
        format!("max relative cost deviation {cost_dev:.2e} (<= 1e-6), max beampattern deviation {pattern_dev:.2e} (<= 1e-8), cond(A) up to 1e4"),
    )
}

fn criterion_3() -> Outcome {
    let dz = designed(desk(4, 40.0, 40.0, 10.0), &[BeamformerKind::Geb]);
    let s = &dz.analogs[0].1;
    let want = reduce(&dz.stats, s).unwrap().r_s;
    let bins = [0usize, 5, 13, 21, 32, 40, 51, 63];
    let cfg = BlockConfig::for_scenario(&dz.scn, 1, 0);
    let blocks = 20_000;
    let mut acc = vec![CMat::zeros(4, 4); bins.len()];
    for b in 0..blocks {
        let seed = derive_seed(303, &[b as u64]);
        let mut real = dz.sampler.sample(seed);
        // only the intended group's signal is needed
        for g in 1..real.taps.len() {
            for t in &mut real.taps[g] {
                t.fill(c(0.0));
            }
        }
        let out = simulate_block(&dz.scn, &real, &[], &cfg, seed).unwrap();
        let f = normalized_dft_rows(&(s.adjoint() * &out.contributions[0]), false);
        for (a, &k) in acc.iter_mut().zip(&bins) {
            let v = f.column(k);
            *a += v * v.adjoint();
        }
    }
    let errs: Vec<f64> = acc.iter().map(|a| (a / c(blocks as f64) - &want).norm() / want.norm()).collect();
    let worst = errs.iter().copied().fold(0.0, f64::max);
    (
        worst <= 0.05,
        format!(
            "relative Frobenius error per bin {:?} over {blocks} blocks, worst {worst:.4} (<= 0.05)",
            errs.iter().map(|e| format!("{e:.4}")).collect::<Vec<_>>()
        ),
    )
}

fn non_increasing(r: &[f64]) -> bool {
    r.windows(2).all(|w| w[1] <= w[0] + 1e-12)
}

fn criterion_4() -> Outcome {
    let mut rng = rng_from_seed(404);
    let (mut ok1, mut ok2, mut ok3) = (0, 0, 0);
    let mut unitary_dev = 0.0f64;
    let mut iters = [0usize; 3];
    for i in 0..100 {
        let m = [8usize, 16, 32, 64][i % 4];
        let d = [1usize, 2, 4, 8][(i / 4) % 4].min(m / 2);
        let s = random_orthonormal(&mut rng, m, d);
        let (_, tr) = pe_am_observed(&s, 1e-10, 500, |it| {
            let e = (it.s_cm.adjoint() * it.s_cm - identity(d)).norm();
            unitary_dev = unitary_dev.max(e);
        })
        .unwrap();
        ok1 += non_increasing(&tr.residuals) as usize;
        iters[0] += tr.iterations;
        let conn = if i % 2 == 0 { ordered_mask(m, d) } else { interlaced_mask(m, d) }.unwrap();
        let (_, tr) = fixed_subarray_observed(&s, &conn, PhaseInit::Random(i as u64), 1e-10, 500, |_| {}).unwrap();
        ok2 += non_increasing(&tr.residuals) as usize;
        iters[1] += tr.iterations;
        let (_, tr) = dynamic_connection_observed(&s, i as u64, 1e-10, 500, |_| {}).unwrap();
        ok3 += non_increasing(&tr.residuals) as usize;
        iters[2] += tr.iterations;
    }
    (
        ok1 == 100 && ok2 == 100 && ok3 == 100 && unitary_dev <= 1e-10,
        format!(
            "monotone traces: pe-am {ok1}/100, fixed subarray {ok2}/100, dynamic connection {ok3}/100; max ||S_cm^H S_cm - I|| {unitary_dev:.2e}; mean iterations {:?}",
            iters.map(|n| n / 100)
        ),
    )
}

fn criterion_5() -> Outcome {
    let mut rng = rng_from_seed(505);
    let scales = [1e-3, 1e-2, 0.1, 1.0, std::f64::consts::PI];
    let mut beaten = 0usize;
    let mut min_gap = f64::INFINITY;
    for i in 0..20 {
        let m = [8usize, 16, 32, 64][i % 4];
        let d = 1 + i % 4;
        let s = random_orthonormal(&mut rng, m, d);
        let pe = phase_extraction(&s).s_c;
        let best = (&s - &pe).norm();
        for t in 0..10_000 {
            let sigma = scales[t % scales.len()];
            let p = pe.map(|z| z * Complex64::from_polar(1.0, sigma * rng.random_range(-1.0..1.0)));
            let gap = (&s - &p).norm() - best;
            min_gap = min_gap.min(gap);
            beaten += (gap < 0.0) as usize;
        }
    }
    (
        beaten == 0,
        format!("{beaten} of 200000 unit-modulus perturbations beat phase extraction; smallest gap {min_gap:.2e}"),
    )
}

/// Haar unitaries and small perturbations of `best`.
fn unitary_trials(rng: &mut SimRng, best: &CMat, n: usize) -> Vec<CMat> {
    let d = best.nrows();
    (0..n)
        .map(|t| {
            if t % 2 == 0 {
                random_orthonormal(rng, d, d)
            } else {
                let eps = 10f64.powi(-(1 + (t % 6) as i32));
                orthonormalize(&(best + gaussian(rng, d, d) * c(eps))).unwrap()
            }
        })
        .collect()
}

fn criterion_6() -> Outcome {
    let mut rng = rng_from_seed(606);
    let mut beaten = [0usize; 2];
    for i in 0..10 {
        let (m, d) = ([16usize, 32][i % 2], 2 + i % 3);
        let s = random_orthonormal(&mut rng, m, d);
        let s_c = random_unit_modulus(&mut rng, m, d);
        let s_cm = compensation_step(&s, &s_c).unwrap();
        let best = (&s - &s_c * &s_cm).norm();
        for u in unitary_trials(&mut rng, &s_cm, 10_000) {
            beaten[0] += ((&s - &s_c * u).norm() < best - 1e-12) as usize;
        }
        let mut s_tilde = CMat::zeros(m, d);
        for r in 0..m {
            s_tilde[(r, rng.random_range(0..d))] = unit_phase(&mut rng);
        }
        let a = rotation_step(&s, &s_tilde).unwrap();
        let best = (&s * &a - &s_tilde).norm();
        for u in unitary_trials(&mut rng, &a, 10_000) {
            beaten[1] += ((&s * u - &s_tilde).norm() < best - 1e-12) as usize;
        }
    }
    (
        beaten == [0, 0],
        format!(
            "unitaries beating the closed-form step: compensation {} / 100000, rotation {} / 100000",
            beaten[0], beaten[1]
        ),
    )
}

fn criterion_7() -> Outcome {
    let dz = designed(desk(4, 40.0, 40.0, 10.0), &FULL);
    let mut zf_dev = 0.0f64;
    for (_, s) in &dz.analogs {
        for t in 0..50 {
            let real = dz.sampler.sample(derive_seed(707, &[t]));
            let eff = effective_channel(s, &real, 0, 64).unwrap();
            let bank = zf_combiners(&eff).unwrap();
            for (w, lam) in bank.w.iter().zip(&eff.freq) {
                zf_dev = zf_dev.max((w.adjoint() * lam - identity(2)).norm());
            }
        }
    }
    // interference-free group at E_s / N0 = 1e6
    let dz = designed(Scenario::table1(32, [4; 4], [1e6, 0.0, 0.0, 0.0]).with_phi(10.0), &FULL);
    let mut lim_dev = 0.0f64;
    for (_, s) in &dz.analogs {
        let rd = reduce(&dz.stats, s).unwrap();
        for t in 0..50 {
            let real = dz.sampler.sample(derive_seed(708, &[t]));
            let eff = effective_channel(s, &real, 0, 64).unwrap();
            let lm = lmmse_combiners(&eff, &rd, 1e6, 2).unwrap();
            for (w, lam) in lm.w.iter().zip(&eff.freq) {
                lim_dev = lim_dev.max((w.adjoint() * lam - identity(2)).norm());
            }
        }
    }
    (
        zf_dev <= 1e-10 && lim_dev <= 1e-3,
        format!("max ||W^H L - I|| zf {zf_dev:.2e} (<= 1e-10), lmmse at 1e6 {lim_dev:.2e} (<= 1e-3); 4 designs x 50 draws x 64 bins"),
    )
}

fn criterion_8() -> Outcome {
    let mut violations = 0usize;
    let mut count = 0usize;
    let mut worst = f64::INFINITY;
    for phi in [-40.0, -20.0, 0.0, 10.0, 25.0, 40.0] {
        let dz = designed(desk(4, 20.0, 20.0, phi), &FULL);
        for (_, s) in &dz.analogs {
            let rd = reduce(&dz.stats, s).unwrap();
            for t in 0..25 {
                let real = dz.sampler.sample(derive_seed(808, &[t, phi as i64 as u64]));
                let eff = effective_channel(s, &real, 0, 64).unwrap();
                let sinr = |kind| {
                    let bank = build_combiners(kind, &eff, &rd, db(20.0), 2).unwrap();
                    bussgang_reports(&eff, &bank, &rd, db(20.0), 2).unwrap()
                };
                let (zf, lm) = (sinr(CombinerKind::Zf), sinr(CombinerKind::Lmmse));
                for (z, l) in zf.iter().zip(&lm) {
                    count += 1;
                    let margin = (l.sinr - z.sinr) / z.sinr;
                    worst = worst.min(margin);
                    violations += (margin < -1e-9) as usize;
                }
            }
        }
    }
    (
        violations == 0,
        format!(
            "{violations} of {count} user realizations with LMMSE SINR below ZF; smallest relative margin {worst:.3e}"
        ),
    )
}

/// Capacity samples over (φ, trial, user) in a fixed order.
fn capacity_samples(res: &SweepResult, kind: BeamformerKind, comb: CombinerKind) -> Vec<f64> {
    let ci = res.config.combiners.iter().position(|&c| c == comb).unwrap();
    res.points
        .iter()
        .map(|p| p.as_ref().expect("sweep point failed"))
        .flat_map(|p| p.design(kind).unwrap().capacity[ci].samples.iter().flatten().copied().collect::<Vec<_>>())
        .collect()
}

fn mean_se(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

/// Mean difference `a − b` and the standard error of that mean.
fn paired(a: &[f64], b: &[f64]) -> (f64, f64) {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    mean_se(&d)
}

/// Checks `kinds[i] > kinds[i+1]` beyond one paired standard error for each combiner.
fn ordering(res: &SweepResult, kinds: &[BeamformerKind], detail: &mut String) -> bool {
    let mut ok = true;
    for &comb in &res.config.combiners {
        let s: Vec<Vec<f64>> = kinds.iter().map(|&k| capacity_samples(res, k, comb)).collect();
        let means: Vec<String> = kinds
            .iter()
            .zip(&s)
            .map(|(k, x)| {
                let (m, se) = mean_se(x);
                format!("{}={m:.3}+-{se:.3}", k.label())
            })
            .collect();
        detail.push_str(&format!(" [{}: {}", comb.label(), means.join(" ")));
        for i in 0..kinds.len() - 1 {
            let (diff, se) = paired(&s[i], &s[i + 1]);
            ok &= diff - se > 0.0;
            detail.push_str(&format!("; {}-{} {diff:.3} (se {se:.4})", kinds[i].label(), kinds[i + 1].label()));
        }
        detail.push(']');
    }
    ok
}

fn criterion_9() -> Outcome {
    let mut cfg = table1_scaled(32).unwrap();
    for (g, grp) in cfg.scenario.groups.iter_mut().enumerate() {
        grp.rf_chains = 4;
        grp.symbol_energy_db = if g == 0 { 50.0 } else { 20.0 };
    }
    cfg.pipeline.beamformers = FULL.iter().map(|k| k.label().to_string()).collect();
    cfg.pipeline.estimator = "none".into();
    cfg.sweep.phi_step = 1.0;
    cfg.sweep.beampattern_phis.clear();
    cfg.mc.trials = 200;
    cfg.validate().unwrap();
    let res = phi_sweep(&cfg.scenario(), &cfg.phi_grid(), &cfg.sweep_config()).unwrap();
    let order = [BeamformerKind::Geb, BeamformerKind::PeAm, BeamformerKind::Pe, BeamformerKind::Dft];
    let mut detail = String::from("M=32 D=4 E1=50 dB interferers 20 dB, 91 angles x 200 trials;");
    let mut ok = ordering(&res, &order, &mut detail);
    for &comb in &res.config.combiners {
        let geb = res.average_capacity(BeamformerKind::Geb, comb);
        let gap = (geb - res.average_capacity(BeamformerKind::PeAm, comb)) / geb;
        ok &= gap <= 0.05;
        detail.push_str(&format!(" {} geb-pe-am gap {:.2}% (<= 5%)", comb.label(), 100.0 * gap));
    }
    (ok, detail)
}

fn criterion_10() -> Outcome {
    let scn = Scenario::table1_merged(32, 8, [db(30.0), db(20.0), db(20.0)]);
    let kinds = [BeamformerKind::Dynamic, BeamformerKind::FixedOrdered, BeamformerKind::FixedInterlaced];
    let cfg = jsdm_core::SweepConfig {
        beamformers: kinds.to_vec(),
        combiners: vec![CombinerKind::Zf, CombinerKind::Lmmse],
        trials: 200,
        seed: 1,
        ..jsdm_core::SweepConfig::default()
    };
    let res = phi_sweep(&scn, &linear_grid(-45.0, 45.0, 1.0).unwrap(), &cfg).unwrap();
    let mut detail = String::from("merged group M=32 D=8 E=30 dB interferers 20 dB, 91 angles x 200 trials;");
    let mut ok = ordering(&res, &kinds, &mut detail);
    let gap = |k| res.average_capacity(k, CombinerKind::Lmmse) - res.average_capacity(k, CombinerKind::Zf);
    let (gd, go) = (gap(BeamformerKind::Dynamic), gap(BeamformerKind::FixedOrdered));
    ok &= gd <= go;
    detail.push_str(&format!(" lmmse-zf gap dynamic {gd:.3} <= ordered {go:.3}"));
    (ok, detail)
}

fn criterion_11() -> Outcome {
    let dz = designed(desk(4, 40.0, 40.0, 10.0), &[BeamformerKind::Geb, BeamformerKind::Dft]);
    let own: Vec<f64> = dz.scn.clusters(0).unwrap().iter().map(|c| c.mean_aoa_deg).collect();
    let intf: Vec<f64> = (1..4).flat_map(|g| dz.scn.clusters(g).unwrap()).map(|c| c.mean_aoa_deg).collect();
    let geb_own = beampattern(&dz.analogs[0].1, &own).unwrap();
    let peak = geb_own.iter().copied().fold(0.0, f64::max);
    let geb_i = beampattern(&dz.analogs[0].1, &intf).unwrap();
    let dft_i = beampattern(&dz.analogs[1].1, &intf).unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for ((theta, g), d) in intf.iter().zip(&geb_i).zip(&dft_i) {
        let rel = 10.0 * (g / peak).log10();
        ok &= rel <= -20.0 && g < d;
        parts.push(format!("{theta:.1}deg: geb {rel:.1} dB, dft {:.1} dB", 10.0 * (d / peak).log10()));
    }
    (ok, format!("phi=10 M=32 D=4, relative to geb peak over own clusters: {}", parts.join("; ")))
}

fn criterion_12() -> Outcome {
    let lens = [32usize, 40, 48, 64];
    let energies = [10.0, 20.0, 30.0, 40.0];
    let mut ok = true;
    let mut ls_above = 0;
    let mut monotone = true;
    let mut mc_err = 0.0f64;
    for (ei, &e) in energies.iter().enumerate() {
        let scn = desk(4, e, 40.0, 10.0);
        let cov = build_covariances(&scn).unwrap();
        let stats = group_statistics(&cov, &scn, 0).unwrap();
        let geb = compute_geb(&stats, 4).unwrap();
        let s =
            design_beamformer(BeamformerKind::PeAm, &scn, 0, &stats, &geb, &DesignSettings::default()).unwrap().analog;
        let r_h = effective_channel_covariance(&cov, 0, &s).unwrap();
        let eta = reduce(&stats, &s).unwrap().r_eta;
        let active = active_delays_per_user(&scn, 0).unwrap();
        let sampler = ChannelSampler::new(&cov).unwrap();
        let mut prev = (f64::INFINITY, f64::INFINITY);
        for (ti, &t) in lens.iter().enumerate() {
            let pilots = build_pilots(&scn, 0, t, 1212).unwrap();
            let z_l = lmmse_estimator(&pilots, &r_h, &eta).unwrap();
            let z_s = ls_estimator(&pilots, &active, 4).unwrap();
            let (n_l, n_s) = (nmse(&z_l, &pilots, &r_h, &eta).unwrap(), nmse(&z_s, &pilots, &r_h, &eta).unwrap());
            ls_above += (n_l <= n_s) as usize;
            monotone &= n_l <= prev.0 && n_s <= prev.1;
            prev = (n_l, n_s);
            if ti == ei {
                let trials = 5000;
                let (mut err_l, mut err_s) = (0.0, 0.0);
                for k in 0..trials {
                    let seed = derive_seed(1213, &[ei as u64, k]);
                    let real = sampler.sample(seed);
                    let y = receive_pilots(&pilots, &real, &s, &scn, 0, derive_seed(seed, &[99])).unwrap();
                    let h = stack_effective_channel(&real, 0, &s).unwrap();
                    err_l += (&h - apply_estimator(&z_l, &y)).norm_squared();
                    err_s += (&h - apply_estimator(&z_s, &y)).norm_squared();
                }
                let tr = trace(&r_h).re * trials as f64;
                mc_err = mc_err.max(((err_l / tr) - n_l).abs() / n_l).max(((err_s / tr) - n_s).abs() / n_s);
            }
        }
    }
    ok &= ls_above == 16 && monotone && mc_err <= 0.03;
    (
        ok,
        format!("lmmse <= ls at {ls_above}/16 grid points, non-increasing in T: {monotone}, worst closed-form vs 5000-trial MC deviation {:.2}% (<= 3%)", 100.0 * mc_err),
    )
}

fn criterion_13() -> Outcome {
    let kinds = [BeamformerKind::Geb, BeamformerKind::PeAm, BeamformerKind::Pe, BeamformerKind::Dft];
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for i in 0..10u64 {
        let phi = -40.0 + 9.0 * i as f64;
        let d = [2usize, 4][i as usize % 2];
        let e1 = [10.0, 20.0, 30.0][i as usize % 3];
        let kind = kinds[i as usize % 4];
        let comb = if i % 3 == 0 { CombinerKind::Zf } else { CombinerKind::Lmmse };
        let dz = designed(desk(d, e1, 20.0, phi), &[kind]);
        let s = dz.analogs[0].1.clone();
        let rd = reduce(&dz.stats, &s).unwrap();
        let fixed = dz.sampler.sample(derive_seed(1313, &[i]));
        let eff = effective_channel(&s, &fixed, 0, 64).unwrap();
        let e_s = db(e1);
        let bank = build_combiners(comb, &eff, &rd, e_s, 2).unwrap();
        let analytic = bussgang_reports(&eff, &bank, &rd, e_s, 2).unwrap();
        let rx = [GroupReceiver { group: 0, analog: s.clone(), combiners: bank }];
        let cfg = BlockConfig::for_scenario(&dz.scn, 1, 0);
        let mut acc = [BussgangAccumulator::default(), BussgangAccumulator::default()];
        let blocks = 100_000usize.div_ceil(64);
        for b in 0..blocks {
            let seed = derive_seed(1314, &[i, b as u64]);
            // intended channel fixed, interferers redrawn every block
            let fresh = dz.sampler.sample(seed);
            let mut taps = fresh.taps;
            taps[0] = fixed.taps[0].clone();
            let real = ChannelRealization { taps, active: fresh.active };
            let out = simulate_block(&dz.scn, &real, &rx, &cfg, derive_seed(seed, &[1])).unwrap();
            for (m, a) in acc.iter_mut().enumerate() {
                for t in 0..64 {
                    a.push(out.estimates[0][(m, t)], out.symbols[0][(m, t)]);
                }
            }
        }
        for (a, r) in acc.iter().zip(&analytic) {
            let rel = (a.sinr() - r.sinr).abs() / r.sinr;
            worst = worst.max(rel);
        }
        parts.push(format!(
            "{}/{}/D{}: {:.2}%",
            kind.label(),
            comb.label(),
            d,
            100.0 * acc.iter().zip(&analytic).map(|(a, r)| (a.sinr() - r.sinr).abs() / r.sinr).fold(0.0, f64::max)
        ));
    }
    (
        worst <= 0.05,
        format!(
            "worst relative SINR mismatch {:.2}% (<= 5%) at {} symbols per user: {}",
            100.0 * worst,
            100_000usize.div_ceil(64) * 64,
            parts.join(", ")
        ),
    )
}

fn toy(r_s: CMat, r_eta: CMat) -> GroupStatistics {
    GroupStatistics { r_s, r_eta, noise_power: 1.0, energy_per_user: 1.0, num_users: 1 }
}

fn criterion_14() -> Outcome {
    let j = Complex64::new(0.0, 1.0);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let diag = |v: &[f64]| CMat::from_diagonal(&jsdm_core::CVec::from_iterator(v.len(), v.iter().map(|&x| c(x))));
    // (pencil, beamformer, value worked out by hand)
    let cases = [
        // tr = 3/2 over 4/2
        (toy(diag(&[2.0, 1.0]), diag(&[1.0, 3.0])), CMat::from_column_slice(2, 1, &[c(h), c(h)]), 0.75),
        // R_s [1, j]^T = [1, j]^T, so the numerator is 1
        (
            toy(CMat::from_row_slice(2, 2, &[c(2.0), j, -j, c(2.0)]), identity(2)),
            CMat::from_column_slice(2, 1, &[c(h), j * h]),
            1.0,
        ),
        // columns e1, e3: (3 + 1) / (1 + 4)
        (
            toy(diag(&[3.0, 2.0, 1.0]), diag(&[1.0, 2.0, 4.0])),
            CMat::from_column_slice(3, 2, &[c(1.0), c(0.0), c(0.0), c(0.0), c(0.0), c(1.0)]),
            0.8,
        ),
    ];
    let errs: Vec<f64> = cases.iter().map(|(st, s, want)| (expected_sinr(st, s).unwrap() - want).abs()).collect();
    let worst = errs.iter().copied().fold(0.0, f64::max);
    (worst <= 1e-12, format!("max deviation from hand-computed trace ratios {worst:.1e} (<= 1e-12) on 3 pencils"))
}

fn criterion_15() -> Outcome {
    let mut cfg = table1_scaled(32).unwrap();
    cfg.pipeline.beamformers = vec!["geb".into(), "pe-am".into(), "dynamic".into()];
    cfg.sweep.phi_start = -20.0;
    cfg.sweep.phi_stop = 10.0;
    cfg.sweep.phi_step = 10.0;
    cfg.sweep.theta_step = 0.5;
    cfg.mc.trials = 10;
    cfg.validate().unwrap();
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        let opts = RunOptions { out_dir: Some(d.path().to_path_buf()), seed: Some(15), threads: Some(1), db: false };
        run(&cfg, &opts).unwrap();
    }
    let files = ["capacity.csv", "summary.csv", "cdf.csv", "beampattern.csv"];
    let same: Vec<bool> = files
        .iter()
        .map(|f| std::fs::read(dirs[0].path().join(f)).unwrap() == std::fs::read(dirs[1].path().join(f)).unwrap())
        .collect();
    let bytes: usize = files.iter().map(|f| std::fs::read(dirs[0].path().join(f)).unwrap().len()).sum();
    (
        same.iter().all(|&s| s),
        format!(
            "{} of {} CSV files byte-identical across two runs ({bytes} bytes)",
            same.iter().filter(|&&s| s).count(),
            files.len()
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 15] = [
        ("geb optimality", criterion_1),
        ("right-factor invariance", criterion_2),
        ("per-bin signal covariance", criterion_3),
        ("alternating-minimization monotonicity", criterion_4),
        ("phase-extraction optimality", criterion_5),
        ("unitary-step optimality", criterion_6),
        ("zero-forcing contract", criterion_7),
        ("lmmse vs zf output sinr", criterion_8),
        ("fully connected capacity ordering", criterion_9),
        ("partially connected capacity ordering", criterion_10),
        ("interference nulls", criterion_11),
        ("channel estimation nmse", criterion_12),
        ("bussgang cross-validation", criterion_13),
        ("trace-ratio score", criterion_14),
        ("determinism", criterion_15),
    ];
    let only: Vec<usize> = std::env::var("JSDM_CRITERIA")
        .ok()
        .map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect())
        .unwrap_or_default();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !only.is_empty() && !only.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let (ok, detail) = match catch_unwind(AssertUnwindSafe(f)) {
            Ok(r) => r,
            Err(e) => {
                let msg =
                    e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
                (false, format!("panicked: {}", msg.unwrap_or_default()))
            }
        };
        failed += !ok as usize;
        println!(
            "criterion {n:>2} {} {name} ({:.1} s): {detail}",
            if ok { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
