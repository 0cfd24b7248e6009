//! The preregistered experiments behind `passage experiment NAME`.
//!
//! Every experiment is a pure function of (seed, sizes): streams are
//! derived from the seed and a per-experiment stream-id block, so reports
//! are byte-identical across worker counts. Experiments whose targets are
//! statistical retry once on an independent stream block and fail only on
//! double rejection; `attempts` in the report records which pass is shown.

use passage::analytic::special::kolmogorov_survival;
use passage::analytic::{birth_distribution, exit_variance, mean_exit_count};
use passage::coupling::verify_coupling;
use passage::policies::{
    lis_length, sample_planar, sample_selection_count, sample_smallest_first_count_fixed_n,
    sample_smallest_first_count_poisson, ControlFunction,
};
use passage::processes::{sample_entrance_count, sample_exit_count};
use passage::stats::rng::RngStream;
use passage::stats::{chi_square_gof, chi_square_pvalue, ks_two_sample, mc_collect, mc_estimate};
use passage::{Error, Result};

use crate::config::Opts;
use crate::report::{ExperimentReport, Target};

pub const ALPHA: f64 = 1e-3;
const TWO_THIRDS: f64 = 2.0 / 3.0;

pub const EXPERIMENT_NAMES: [&str; 11] = [
    "gap",
    "variance",
    "duality",
    "clt",
    "coupling",
    "depoissonize",
    "policy-gap",
    "lis",
    "tail",
    "capacity",
    "poissonize",
];

pub fn run(name: &str, opts: &Opts) -> Result<ExperimentReport> {
    match name {
        "gap" => gap(opts),
        "variance" => retried(opts, variance),
        "duality" => retried(opts, duality),
        "clt" => clt(opts),
        "coupling" => retried(opts, coupling),
        "depoissonize" => retried(opts, depoissonize),
        "policy-gap" => policy_gap(opts),
        "lis" => retried(opts, lis),
        "tail" => retried(opts, tail),
        "capacity" => retried(opts, capacity),
        "poissonize" => retried(opts, poissonize),
        other => Err(Error::Domain(format!(
            "unknown experiment '{other}'; known: {}",
            EXPERIMENT_NAMES.join(", ")
        ))),
    }
}

/// Double-rejection rule for experiments with statistical targets: rerun
/// once on a shifted stream block if the first pass fails.
fn retried(
    opts: &Opts,
    f: impl Fn(&Opts, u64) -> Result<ExperimentReport>,
) -> Result<ExperimentReport> {
    let mut report = f(opts, 0)?;
    report.param("attempts", 1);
    if report.pass {
        return Ok(report);
    }
    let mut second = f(opts, 1)?;
    second.param("attempts", 2);
    Ok(second)
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

/// One-sample KS distance against U(0,1) with the asymptotic p-bound.
fn ks_uniform(sorted_sample: &[f64]) -> (f64, f64) {
    let n = sorted_sample.len() as f64;
    let mut d = 0.0f64;
    for (i, &u) in sorted_sample.iter().enumerate() {
        d = d.max((i + 1) as f64 / n - u).max(u - i as f64 / n);
    }
    (d, kolmogorov_survival(n.sqrt() * d))
}

fn lsq_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Standard error of a sample variance from the summary moments.
fn se_of_variance(stats: &passage::stats::SummaryStats) -> f64 {
    stats.variance * ((stats.excess_kurtosis + 2.0) / stats.n as f64).sqrt()
}

// -------------------------------------------------------------------------
// gap: exact route at 1e4/1e6 with a uniformization cross-check, MC route
// at t (default 1e4).
// -------------------------------------------------------------------------
fn gap(opts: &Opts) -> Result<ExperimentReport> {
    let mut r = ExperimentReport::new("gap", opts.seed);
    let t_mc = opts.t.unwrap_or(1e4);
    let reps = opts.reps.unwrap_or(10_000_000);
    r.param("t_mc", t_mc);
    r.param("reps", reps);

    let nu4 = mean_exit_count(1e4, 1e-9)?.value;
    let nu6 = mean_exit_count(1e6, 1e-7)?.value;
    let gap4 = (2e4f64).sqrt() - nu4;
    let gap6 = (2e6f64).sqrt() - nu6;
    r.exact("nu_1e4", nu4);
    r.exact("nu_1e6", nu6);
    r.target(Target::within("gap_exact_1e4", gap4, TWO_THIRDS, 0.02));
    r.target(Target::within("gap_exact_1e6", gap6, TWO_THIRDS, 0.01));

    // mandatory independent route at 1e6: mean of the uniformized
    // entrance law equals nu by duality
    // cap sized for the ~steps*eps roundoff drift of 1e6 uniformization
    // steps, still three orders below the comparison tolerance
    let table = birth_distribution(1e6, 1850, 1e-8)?;
    let uni_mean = table.mean();
    r.exact("uniformization_mean_1e6", uni_mean);
    r.target(Target::within(
        "series_vs_uniformization_1e6",
        nu6,
        uni_mean,
        1e-5,
    ));

    let stats = mc_estimate(
        |rng| Ok(sample_exit_count(t_mc, rng) as f64),
        reps,
        RngStream::new(opts.seed, 10),
        opts.workers,
    )?;
    r.mc("exit_count", stats);
    let gap_mc = (2.0 * t_mc).sqrt() - stats.mean;
    r.target(Target::within("gap_mc", gap_mc, TWO_THIRDS, 0.01));
    Ok(r)
}

// -------------------------------------------------------------------------
// variance: empirical Var N(100) against 2t - nu^2 - nu, and the
// asymptotic ratio at 1e4.
// -------------------------------------------------------------------------
fn variance(opts: &Opts, attempt: u64) -> Result<ExperimentReport> {
    let mut r = ExperimentReport::new("variance", opts.seed);
    let reps = opts.reps.unwrap_or(1_000_000);
    r.param("reps", reps);
    let base = 20 + attempt * 500;

    let t1 = 100.0;
    let exact1 = exit_variance(t1, 1e-9)?;
    let s1 = mc_estimate(
        |rng| Ok(sample_exit_count(t1, rng) as f64),
        reps,
        RngStream::new(opts.seed, base),
        opts.workers,
    )?;
    r.exact("variance_exact_100", exact1);
    r.mc("exit_count_100", s1);
    r.target(Target::within(
        "variance_identity_100",
        s1.variance,
        exact1,
        3.0 * se_of_variance(&s1),
    ));

    let t2 = 1e4;
    let s2 = mc_estimate(
        |rng| Ok(sample_exit_count(t2, rng) as f64),
        reps,
        RngStream::new(opts.seed, base + 1),
        opts.workers,
    )?;
    r.mc("exit_count_1e4", s2);
    let ratio = s2.variance / ((2.0 * t2).sqrt() / 3.0);
    // window [0.99, 1.02] around the leading asymptote
    r.target(Target::within("variance_ratio_1e4", ratio, 1.005, 0.015));
    Ok(r)
}

// -------------------------------------------------------------------------
// duality: exit and entrance counts share a law; entrance matches the
// master equation.
// -------------------------------------------------------------------------
fn duality(opts: &Opts, attempt: u64) -> Result<ExperimentReport> {
    let mut r = ExperimentReport::new("duality", opts.seed);
    let t = opts.t.unwrap_or(25.0);
    let reps = opts.reps.unwrap_or(100_000);
    r.param("t", t);
    r.param("reps", reps);
    let base = 30 + attempt * 500;

    let exit = mc_collect(
        |rng| Ok(sample_exit_count(t, rng) as f64),
        reps,
        RngStream::new(opts.seed, base),
        opts.workers,
    )?;
    let entrance = mc_collect(
        |rng| Ok(sample_entrance_count(t, rng) as f64),
        reps,
        RngStream::new(opts.seed, base + 1),
        opts.workers,
    )?;

    let (d, p) = ks_two_sample(&sorted(exit), &sorted(entrance.clone()))?;
    r.exact("ks_statistic", d);
    r.target(Target::greater_than("ks_p_bound", p, ALPHA));

    let n_max = ((2.0 * t).sqrt() as usize + 30).max(40);
    let table = birth_distribution(t, n_max, 1e-12)?;
    let mut counts = vec![0u64; table.probs.len()];
    for &v in &entrance {
        let k = (v as usize).min(counts.len() - 1);
        counts[k] += 1;
    }
    let (stat, dof) = chi_square_gof(&counts, &table.probs)?;
    let p_chi = chi_square_pvalue(stat, dof);
    r.exact("chi_square_statistic", stat);
    r.exact("chi_square_dof", dof as f64);
    r.target(Target::greater_than("chi_square_p", p_chi, ALPHA));
    Ok(r)
}

// -------------------------------------------------------------------------
// clt: third and fourth standardized moments of N(1e4).
// -------------------------------------------------------------------------
fn clt(opts: &Opts) -> Result<ExperimentReport> {
    let mut r = ExperimentReport::new("clt", opts.seed);
    let t = opts.t.unwrap_or(1e4);
    let reps = opts.reps.unwrap_or(1_000_000);
    r.param("t", t);
    r.param("reps", reps);

    let stats = mc_estimate(
        |rng| Ok(sample_exit_count(t, rng) as f64),
        reps,
        RngStream::new(opts.seed, 50),
        opts.workers,
    )?;
    r.mc("exit_count", stats);
    r.target(Target::at_most("abs_skewness", stats.skewness.abs(), 0.1));
    r.target(Target::at_most(
        "abs_excess_kurtosis",
        stats.excess_kurtosis.abs(),
        0.1,
    ));
    Ok(r)
}

// -------------------------------------------------------------------------
// coupling: deterministic checks on every realization, record-selection
// property of the greedy control, pooled uniformity of transformed marks,
// exact inversion.
// -------------------------------------------------------------------------
fn coupling(opts: &Opts, attempt: u64) -> Result<ExperimentReport> {
    let mut r = ExperimentReport::new("coupling", opts.seed);
    let t = opts.t.unwrap_or(50.0);
    let reps = opts.reps.unwrap_or(10_000);
    r.param("t", t);
    r.param("reps", reps);
    let base = 60 + attempt * 500;

    let mut det_failures = 0u64;
    let mut record_failures = 0u64;
    let mut pooled_marks: Vec<f64> = Vec::new();

    for (k, control) in [ControlFunction::Optimal, ControlFunction::Greedy]
        .iter()
        .enumerate()
    {
        let stream = RngStream::new(opts.seed, base + k as u64);
        for i in 0..reps {
            let mut rng = stream.substream(i).rng();
            let s = sample_planar(t, &mut rng);
            let (report, result) = verify_coupling(&s, control)?;
            if !report.pass {
                det_failures += 1;
            }
            if matches!(control, ControlFunction::Greedy) {
                // psi = 1 accepts exactly the running records
                let mut max = 0.0f64;
                let records: Vec<f64> = s
                    .points
                    .iter()
                    .filter_map(|p| {
                        if p.mark > max {
                            max = p.mark;
                            Some(p.time)
                        } else {
                            None
                        }
                    })
                    .collect();
                let accepted: Vec<f64> =
                    result.i_trace.accepted.iter().map(|p| p.time).collect();
                if records != accepted {
                    record_failures += 1;
                }
            } else {
                pooled_marks.extend(result.transformed.points.iter().map(|p| p.mark));
            }
        }
    }

    r.target(Target::equals_count("deterministic_failures", det_failures, 0));
    r.target(Target::equals_count("greedy_record_failures", record_failures, 0));
    let (d, p) = ks_uniform(&sorted(pooled_marks));
    r.exact("pooled_marks_ks", d);
    r.target(Target::greater_than("pooled_marks_ks_p", p, ALPHA));
    Ok(r)
}

// -------------------------------------------------------------------------
// depoissonize: fixed-n means vs the Poisson-randomized mean.
// -------------------------------------------------------------------------
fn depoissonize(opts: &Opts, attempt: u64) -> Result<ExperimentReport> {
    let mut r = ExperimentReport::new("depoissonize", opts.seed);
    let base = 70 + attempt * 500;
    let ns = [100u64, 400, 1600];
    // tighter reps for larger n: the decreasing-difference check compares
    // quantities a few millistandard-deviations apart
    let reps_for = |n: u64| -> u64 {
        let scaled = if n >= 400 { 4_000_000 } else { 1_000_000 };
        opts.reps.unwrap_or(scaled)
    };

    let mut diffs = Vec::new();
    let mut kappa_1600 = 0.0;
    for (k, &n) in ns.iter().enumerate() {
        let reps = reps_for(n);
        let stats = mc_estimate(
            |rng| Ok(sample_smallest_first_count_fixed_n(n, 1.0, rng)? as f64),
            reps,
            RngStream::new(opts.seed, base + k as u64),
            opts.workers,
        )?;
        r.param(&format!("reps_{n}"), reps);
        r.mc(&format!("kappa_{n}"), stats);
        let nu = mean_exit_count(n as f64, 1e-9)?.value;
        r.exact(&format!("nu_{n}"), nu);
        let diff = (nu - stats.mean).abs();
        r.target(Target::at_most(&format!("abs_nu_minus_kappa_{n}"), diff, 0.05));
        diffs.push(diff);
        if n == 1600 {
            kappa_1600 = stats.mean;
        }
    }
    r.target(Target::within(
        "kappa_1600_vs_asymptote",
        kappa_1600,
        (3200.0f64).sqrt() - TWO_THIRDS,
        0.02,
    ));
    r.target(Target::greater_than(
        "diff_decreasing_100_400",
        diffs[0],
        diffs[1],
    ));
    r.target(Target::greater_than(
        "diff_decreasing_400_1600",
        diffs[1],
        diffs[2],
    ));
    Ok(r)
}

// -------------------------------------------------------------------------
// poissonize: Poisson(3) mixture of fixed-n means recovers nu(3).
// -------------------------------------------------------------------------
fn poissonize(opts: &Opts, attempt: u64) -> Result<ExperimentReport> {
    let mut r = ExperimentReport::new("poissonize", opts.seed);
    let lambda = opts.t.unwrap_or(3.0);
    let reps = opts.reps.unwrap_or(200_000);
    let n_cut = 20u64;
    r.param("lambda", lambda);
    r.param("reps", reps);
    r.param("n_cut", n_cut);
    let base = 80 + attempt * 500;

    let mut mixture = 0.0f64;
    let mut var_sum = 0.0f64;
    let mut weight = (-lambda).exp(); // P(Pois = 0); kappa_0 = 0
    for n in 1..=n_cut {
        weight *= lambda / n as f64;
        let stats = mc_estimate(
            |rng| Ok(sample_smallest_first_count_fixed_n(n, 1.0, rng)? as f64),
            reps,
            RngStream::new(opts.seed, base + n),
            opts.workers,
        )?;
        mixture += weight * stats.mean;
        var_sum += weight * weight * stats.variance / stats.n as f64;
    }
    let nu = mean_exit_count(lambda, 1e-9)?.value;
    let se = var_sum.sqrt();
    r.exact("mixture_mean", mixture);
    r.exact("nu", nu);
    r.exact("combined_se", se);
    // 1e-3 covers the truncated Poisson tail beyond n_cut
    r.target(Target::within(
        "poissonization_identity",
        mixture,
        nu,
        3.0 * se + 1e-3,
    ));
    Ok(r)
}

// -------------------------------------------------------------------------
// policy-gap: gap of the asymptotically optimal online policy grows like
// (1/12) ln t.
// -------------------------------------------------------------------------
fn policy_gap(opts: &Opts) -> Result<ExperimentReport> {
    let mut r = ExperimentReport::new("policy-gap", opts.seed);
    let reps = opts.reps.unwrap_or(1_000_000);
    r.param("reps", reps);
    let ts = [1e2, 1e3, 1e4, 1e5];

    let mut gaps = Vec::new();
    for (k, &t) in ts.iter().enumerate() {
        let stats = mc_estimate(
            |rng| Ok(sample_selection_count(t, &ControlFunction::Optimal, rng)? as f64),
            reps,
            RngStream::new(opts.seed, 90 + k as u64),
            opts.workers,
        )?;
        r.mc(&format!("count_t_{t:e}"), stats);
        gaps.push((2.0 * t).sqrt() - stats.mean);
    }
    for k in 1..gaps.len() {
        r.target(Target::greater_than(
            &format!("gap_increasing_{k}"),
            gaps[k],
            gaps[k - 1],
        ));
    }
    let lnts: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
    let slope = lsq_slope(&lnts, &gaps);
    r.exact("slope_vs_ln_t", slope);
    // soft window around 1/12
    r.target(Target::within("slope", slope, 0.085, 0.025));
    Ok(r)
}

// -------------------------------------------------------------------------
// lis: offline (prophet) count by patience sorting at t = 2500.
// -------------------------------------------------------------------------
fn lis(opts: &Opts, attempt: u64) -> Result<ExperimentReport> {
    let mut r = ExperimentReport::new("lis", opts.seed);
    let t = opts.t.unwrap_or(2500.0);
    let reps = opts.reps.unwrap_or(10_000);
    r.param("t", t);
    r.param("reps", reps);

    let stats = mc_estimate(
        |rng| {
            let s = sample_planar(t, rng);
            Ok(lis_length(&s) as f64)
        },
        reps,
        RngStream::new(opts.seed, 95 + attempt * 500),
        opts.workers,
    )?;
    r.mc("lis_length", stats);
    // 2 sqrt(t) - c0 t^{1/6} ~ 93.5; window [92, 95]
    r.target(Target::within("lis_mean", stats.mean, 93.5, 1.5));
    Ok(r)
}

// -------------------------------------------------------------------------
// tail: large-deviation envelope for the 50th entrance jump time.
// -------------------------------------------------------------------------
fn tail(opts: &Opts, attempt: u64) -> Result<ExperimentReport> {
    let mut r = ExperimentReport::new("tail", opts.seed);
    let n = opts.n.unwrap_or(50);
    let reps = opts.reps.unwrap_or(1_000_000);
    r.param("n", n);
    r.param("reps", reps);

    let z_grid: Vec<f64> = (1..=20).map(|k| k as f64 * 0.5).collect();
    let report = passage::stats::tail_bound_check(
        n,
        reps,
        &z_grid,
        RngStream::new(opts.seed, 97 + attempt * 500),
        opts.workers,
    )?;
    let min_margin = report
        .margin
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    r.exact("min_margin", min_margin);
    for (z, e) in report.z.iter().zip(&report.empirical) {
        r.exact(&format!("tail_z_{z}"), *e);
    }
    r.target(Target::at_least("envelope_margin", min_margin, 0.0));
    Ok(r)
}

// -------------------------------------------------------------------------
// capacity: general capacity C rescales time.
// -------------------------------------------------------------------------
fn capacity(opts: &Opts, attempt: u64) -> Result<ExperimentReport> {
    let mut r = ExperimentReport::new("capacity", opts.seed);
    let reps = opts.reps.unwrap_or(1_000_000);
    r.param("reps", reps);
    let base = 98 + attempt * 500;

    // C = 1/2 at t = 200: mean matches nu(Ct)
    let c1 = opts.capacity.unwrap_or(0.5);
    let t1 = opts.t.unwrap_or(200.0);
    r.param("c_small", c1);
    r.param("t_small", t1);
    let s1 = mc_estimate(
        |rng| Ok(sample_smallest_first_count_poisson(t1, c1, rng)? as f64),
        reps,
        RngStream::new(opts.seed, base),
        opts.workers,
    )?;
    r.mc("count_small", s1);
    let nu_ct = mean_exit_count(c1 * t1, 1e-9)?.value;
    r.exact("nu_ct", nu_ct);
    r.target(Target::within(
        "capacity_mean_small",
        s1.mean,
        nu_ct,
        3.0 * s1.se,
    ));

    // C = 2 at t = 5000: two-thirds limit at the rescaled time
    let s2 = mc_estimate(
        |rng| Ok(sample_smallest_first_count_poisson(5000.0, 2.0, rng)? as f64),
        reps,
        RngStream::new(opts.seed, base + 1),
        opts.workers,
    )?;
    r.mc("count_large", s2);
    let gap = (2.0f64 * 2.0 * 5000.0).sqrt() - s2.mean;
    r.target(Target::within("capacity_gap_large", gap, TWO_THIRDS, 0.05));
    Ok(r)
}
