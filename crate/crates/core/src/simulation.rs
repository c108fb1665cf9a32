//! Monte Carlo experiments over random weight vectors.
//!
//! Each draw has its own ChaCha8 stream: the generator is seeded from the
//! run seed and switched to stream number `draw`, so any draw can be
//! regenerated in isolation and results do not depend on thread
//! scheduling. Uniform reals are taken from the top 53 bits of `next_u64`.

use std::io::Write;
use std::str::FromStr;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::links::{weights_for_design, Beta, LinkKind, WeightVector};
use crate::model::{det_from_l, ModelSpec, VarianceVector};
use crate::solver::{
    approximate_by_pair_averaging, exact_solution, saturation_condition_w, solve_numeric, Method,
    NumericOptions,
};

/// Identifier recorded in every summary.
pub const RNG_ALGORITHM: &str = "chacha8/seed_from_u64/stream=draw/u53";

/// Relative-loss threshold reported by the approximation experiment.
pub const LOSS_THRESHOLD: f64 = 3e-4;

/// Tolerance on the pair-averaging error bound per draw.
pub const BOUND_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    SaturationRate,
    ApproxLoss,
}

impl Experiment {
    pub fn tag(self) -> &'static str {
        match self {
            Experiment::SaturationRate => "saturation_rate",
            Experiment::ApproxLoss => "approx_loss",
        }
    }
}

impl std::fmt::Display for Experiment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "saturation_rate" => Ok(Experiment::SaturationRate),
            "approx_loss" => Ok(Experiment::ApproxLoss),
            other => Err(Error::InvalidConfig(format!(
                "unknown experiment `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub experiment: Experiment,
    pub n_draws: u64,
    pub seed: u64,
    pub w_low: f64,
    pub w_high: f64,
    /// When set, draws β uniformly from [−beta_range, beta_range]³ and maps
    /// it to weights through this link instead of drawing w directly.
    pub link: Option<LinkKind>,
    pub beta_range: f64,
    /// Keep per-draw records for export.
    pub retain_records: bool,
}

impl SimConfig {
    /// w iid uniform on (0, 0.25).
    pub fn saturation_rate(n_draws: u64, seed: u64) -> Self {
        SimConfig {
            experiment: Experiment::SaturationRate,
            n_draws,
            seed,
            w_low: 0.0,
            w_high: 0.25,
            link: None,
            beta_range: 3.0,
            retain_records: false,
        }
    }

    /// w iid uniform on [0.05, 0.25].
    pub fn approx_loss(n_draws: u64, seed: u64) -> Self {
        SimConfig {
            experiment: Experiment::ApproxLoss,
            w_low: 0.05,
            ..SimConfig::saturation_rate(n_draws, seed)
        }
    }

    pub fn defaults_for(experiment: Experiment, n_draws: u64, seed: u64) -> Self {
        match experiment {
            Experiment::SaturationRate => SimConfig::saturation_rate(n_draws, seed),
            Experiment::ApproxLoss => SimConfig::approx_loss(n_draws, seed),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_draws == 0 {
            return Err(Error::InvalidConfig("n_draws must be at least 1".into()));
        }
        if !(self.w_low.is_finite() && self.w_high.is_finite()) {
            return Err(Error::InvalidConfig("weight range must be finite".into()));
        }
        if !(0.0 <= self.w_low && self.w_low < self.w_high) {
            return Err(Error::InvalidConfig(format!(
                "need 0 <= w_low < w_high, got [{}, {}]",
                self.w_low, self.w_high
            )));
        }
        if !(self.beta_range.is_finite() && self.beta_range > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "beta_range must be positive, got {}",
                self.beta_range
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaturationRecord {
    pub draw: u64,
    pub w: [f64; 4],
    pub saturated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub draw: u64,
    pub w: [f64; 4],
    /// |X′WX|^{1/3} at the certified numeric optimum.
    pub do_cuberoot: f64,
    /// |X′WX|^{1/3} at the analytic design.
    pub dstar_cuberoot: f64,
    pub rel_loss: f64,
    pub method: Method,
    /// Pair-averaging error bound; absent on exact branches.
    pub bound: Option<f64>,
    /// L(p_o) − L(p_*); zero on exact branches.
    pub l_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", content = "rows", rename_all = "snake_case")]
pub enum Records {
    SaturationRate(Vec<SaturationRecord>),
    ApproxLoss(Vec<LossRecord>),
}

impl Records {
    pub fn len(&self) -> usize {
        match self {
            Records::SaturationRate(r) => r.len(),
            Records::ApproxLoss(r) => r.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Statistics {
    SaturationRate {
        saturated: u64,
        used: u64,
        rate: f64,
        std_error: f64,
    },
    ApproxLoss {
        threshold: f64,
        fraction_below: f64,
        max_loss: f64,
        min_loss: f64,
        median_loss: f64,
        q95_loss: f64,
        exact_draws: u64,
        approx_draws: u64,
        bound_violations: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSummary {
    pub experiment: Experiment,
    pub n_draws: u64,
    pub seed: u64,
    pub rng: String,
    /// Where the reference optimum comes from.
    pub reference_optimum: Option<String>,
    /// Draws dropped because a weight was exactly zero.
    pub excluded: u64,
    pub statistics: Statistics,
    pub records: Option<Records>,
}

fn draw_rng(seed: u64, draw: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(draw);
    rng
}

fn unit(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Weight vector of draw `draw`; `None` when a weight came out exactly zero.
pub fn draw_weights(cfg: &SimConfig, draw: u64) -> Result<Option<[f64; 4]>> {
    let mut rng = draw_rng(cfg.seed, draw);
    let w: [f64; 4] = match cfg.link {
        None => {
            let span = cfg.w_high - cfg.w_low;
            let mut w = [0.0; 4];
            for x in w.iter_mut() {
                // Open at zero: an exact zero is redrawn.
                *x = loop {
                    let c = cfg.w_low + span * unit(&mut rng);
                    if c > 0.0 {
                        break c;
                    }
                };
            }
            w
        }
        Some(link) => {
            let b: Vec<f64> = (0..3)
                .map(|_| cfg.beta_range * (2.0 * unit(&mut rng) - 1.0))
                .collect();
            let model = ModelSpec::main_effects(2)?;
            let w = weights_for_design(link, &Beta::new(b)?, &model)?;
            w.as_slice().try_into().expect("four points")
        }
    };
    Ok(if w.contains(&0.0) { None } else { Some(w) })
}

/// Analytic design versus the certified numeric optimum for one weight vector.
pub fn approx_loss_for(draw: u64, seed: u64, w: [f64; 4]) -> Result<LossRecord> {
    let v = VarianceVector::from_weights(&WeightVector::new(w.to_vec())?)?;
    if let Some(exact) = exact_solution(&v) {
        let l = exact.l_value.expect("positive variances");
        let d = det_from_l(&v, l).cbrt();
        return Ok(LossRecord {
            draw,
            w,
            do_cuberoot: d,
            dstar_cuberoot: d,
            rel_loss: 0.0,
            method: exact.method,
            bound: None,
            l_gap: 0.0,
        });
    }
    let approx = approximate_by_pair_averaging(&v)?;
    let optimum = solve_numeric(&v, &NumericOptions::default())?;
    let cert = optimum
        .certificate
        .as_ref()
        .expect("numeric results carry a certificate");
    if !cert.certified {
        return Err(Error::Certification {
            draw,
            seed,
            reason: format!(
                "stationarity residual {:e} (tol {:e}), ordering_ok = {}",
                cert.stationarity_residual, cert.stationarity_tol, cert.ordering_ok
            ),
        });
    }
    let l_o = optimum.l_value.expect("positive variances");
    let l_a = approx.result.l_value.expect("positive variances");
    let d_o = det_from_l(&v, l_o).cbrt();
    let d_a = det_from_l(&v, l_a).cbrt();
    Ok(LossRecord {
        draw,
        w,
        do_cuberoot: d_o,
        dstar_cuberoot: d_a,
        rel_loss: (d_o - d_a) / d_o,
        method: Method::PairAveraging,
        bound: Some(approx.bound),
        l_gap: l_o - l_a,
    })
}

fn map_draws<T, F>(cfg: &SimConfig, f: F) -> Result<(Vec<T>, u64)>
where
    T: Send,
    F: Fn(u64, [f64; 4]) -> Result<T> + Sync,
{
    let out: Vec<Result<Option<T>>> = (0..cfg.n_draws)
        .into_par_iter()
        .map(|d| draw_weights(cfg, d)?.map(|w| f(d, w)).transpose())
        .collect();
    let mut kept = Vec::with_capacity(out.len());
    let mut excluded = 0;
    for r in out {
        match r? {
            Some(t) => kept.push(t),
            None => excluded += 1,
        }
    }
    Ok((kept, excluded))
}

fn check_experiment(cfg: &SimConfig, want: Experiment) -> Result<()> {
    cfg.validate()?;
    if cfg.experiment != want {
        return Err(Error::InvalidConfig(format!(
            "config is for `{}`, expected `{}`",
            cfg.experiment, want
        )));
    }
    Ok(())
}

/// Fraction of draws whose D-optimal design is saturated.
pub fn run_saturation_rate(cfg: &SimConfig) -> Result<SimSummary> {
    check_experiment(cfg, Experiment::SaturationRate)?;
    let (rows, excluded) = map_draws(cfg, |draw, w| {
        let report = saturation_condition_w(&WeightVector::new(w.to_vec())?)?;
        Ok(SaturationRecord {
            draw,
            w,
            saturated: report.holds,
        })
    })?;
    let used = rows.len() as u64;
    let saturated = rows.iter().filter(|r| r.saturated).count() as u64;
    let rate = if used > 0 {
        saturated as f64 / used as f64
    } else {
        0.0
    };
    let std_error = if used > 0 {
        (rate * (1.0 - rate) / used as f64).sqrt()
    } else {
        0.0
    };
    Ok(SimSummary {
        experiment: Experiment::SaturationRate,
        n_draws: cfg.n_draws,
        seed: cfg.seed,
        rng: RNG_ALGORITHM.into(),
        reference_optimum: None,
        excluded,
        statistics: Statistics::SaturationRate {
            saturated,
            used,
            rate,
            std_error,
        },
        records: cfg.retain_records.then_some(Records::SaturationRate(rows)),
    })
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Relative loss of the analytic design against the certified optimum.
///
/// Aborts with [`Error::Certification`] on the first draw (by index) whose
/// numeric optimum fails certification.
pub fn run_approx_loss(cfg: &SimConfig) -> Result<SimSummary> {
    check_experiment(cfg, Experiment::ApproxLoss)?;
    let seed = cfg.seed;
    let (rows, excluded) = map_draws(cfg, |draw, w| approx_loss_for(draw, seed, w))?;

    let mut losses: Vec<f64> = rows.iter().map(|r| r.rel_loss).collect();
    losses.sort_by(f64::total_cmp);
    let n = losses.len();
    let below = losses.iter().filter(|l| **l < LOSS_THRESHOLD).count();
    let approx_draws = rows.iter().filter(|r| r.bound.is_some()).count() as u64;
    let bound_violations = rows
        .iter()
        .filter(|r| r.bound.is_some_and(|b| r.l_gap > b + BOUND_SLACK))
        .count() as u64;

    Ok(SimSummary {
        experiment: Experiment::ApproxLoss,
        n_draws: cfg.n_draws,
        seed,
        rng: RNG_ALGORITHM.into(),
        reference_optimum: Some("certified_numeric".into()),
        excluded,
        statistics: Statistics::ApproxLoss {
            threshold: LOSS_THRESHOLD,
            fraction_below: if n > 0 { below as f64 / n as f64 } else { 0.0 },
            max_loss: losses.last().copied().unwrap_or(0.0),
            min_loss: losses.first().copied().unwrap_or(0.0),
            median_loss: quantile(&losses, 0.5),
            q95_loss: quantile(&losses, 0.95),
            exact_draws: n as u64 - approx_draws,
            approx_draws,
            bound_violations,
        },
        records: cfg.retain_records.then_some(Records::ApproxLoss(rows)),
    })
}

pub fn run(cfg: &SimConfig) -> Result<SimSummary> {
    match cfg.experiment {
        Experiment::SaturationRate => run_saturation_rate(cfg),
        Experiment::ApproxLoss => run_approx_loss(cfg),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExportFormat {
    Csv,
    JsonLines,
}

impl FromStr for ExportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(ExportFormat::Csv),
            "jsonl" | "json_lines" | "json-lines" | "ndjson" => Ok(ExportFormat::JsonLines),
            other => Err(Error::InvalidConfig(format!(
                "unknown export format `{other}`"
            ))),
        }
    }
}

/// Real number with 12 significant digits, `%g` style.
pub fn format_real(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.11e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        let fixed = format!("{:.*}", decimals, x);
        trim_zeros(&fixed).to_string()
    } else {
        format!("{}e{}", trim_zeros(mantissa), exp)
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn csv_err(e: impl std::fmt::Display) -> Error {
    Error::Export(e.to_string())
}

/// Per-draw records as CSV (with header) or JSON lines, in draw order.
pub fn export_records(summary: &SimSummary, format: ExportFormat) -> Result<Vec<u8>> {
    let records = summary.records.as_ref().ok_or(Error::RecordsNotRetained)?;
    match format {
        ExportFormat::Csv => {
            let mut wtr = csv::Writer::from_writer(Vec::new());
            match records {
                Records::SaturationRate(rows) => {
                    wtr.write_record(["draw", "w1", "w2", "w3", "w4", "saturated"])
                        .map_err(csv_err)?;
                    for r in rows {
                        let mut row = vec![r.draw.to_string()];
                        row.extend(r.w.iter().map(|x| format_real(*x)));
                        row.push(r.saturated.to_string());
                        wtr.write_record(&row).map_err(csv_err)?;
                    }
                }
                Records::ApproxLoss(rows) => {
                    wtr.write_record([
                        "draw",
                        "w1",
                        "w2",
                        "w3",
                        "w4",
                        "do_cuberoot",
                        "dstar_cuberoot",
                        "rel_loss",
                        "method",
                    ])
                    .map_err(csv_err)?;
                    for r in rows {
                        let mut row = vec![r.draw.to_string()];
                        row.extend(r.w.iter().map(|x| format_real(*x)));
                        row.push(format_real(r.do_cuberoot));
                        row.push(format_real(r.dstar_cuberoot));
                        row.push(format_real(r.rel_loss));
                        row.push(r.method.tag().into());
                        wtr.write_record(&row).map_err(csv_err)?;
                    }
                }
            }
            wtr.into_inner().map_err(csv_err)
        }
        ExportFormat::JsonLines => {
            let mut out = Vec::new();
            let mut line = |value: serde_json::Result<String>| -> Result<()> {
                let s = value.map_err(csv_err)?;
                writeln!(out, "{s}").map_err(csv_err)
            };
            match records {
                Records::SaturationRate(rows) => {
                    for r in rows {
                        line(serde_json::to_string(r))?;
                    }
                }
                Records::ApproxLoss(rows) => {
                    for r in rows {
                        line(serde_json::to_string(r))?;
                    }
                }
            }
            Ok(out)
        }
    }
}
