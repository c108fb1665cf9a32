use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use serde_json::json;

use dopt2k::links::{linear_predictor, weights_for_design, Beta, LinkKind, WeightVector};
use dopt2k::model::{det_criterion, objective_l, Design, ModelSpec, VarianceVector};
use dopt2k::robustness::{
    max_uniform_loss, maximin_lower_bound, uniform_efficiency_bound, uniform_loss_22,
    uniform_loss_bounds, Regime,
};
use dopt2k::simulation::{self, format_real, Experiment, ExportFormat, SimConfig};
use dopt2k::solver::{
    saturation_boundary, saturation_condition_beta, saturation_condition_w, solve, NumericOptions,
    SolveOptions, SolveResult,
};

use crate::args::{
    BoundaryArgs, Cli, Command, ExperimentArg, Format, InputArgs, MaximinArgs, RegimeArg,
    RobustnessArgs, SimulateArgs, SolveArgs, WeightsArgs,
};
use crate::Failure;

type Out<'a> = &'a mut dyn Write;
type CmdResult = Result<(), Failure>;

const POINT_ORDER_22: [&str; 4] = ["++", "+-", "-+", "--"];

/// Tolerance for `solve --validate`.
const VALIDATE_TOL: f64 = 1e-12;

pub fn run(cli: &Cli, out: Out) -> CmdResult {
    match &cli.command {
        Command::Weights(a) => weights(a, cli.format, out),
        Command::Solve(a) => {
            json_only(cli.format, "solve")?;
            if a.validate {
                validate(out)
            } else {
                solve_cmd(a, out)
            }
        }
        Command::Saturation(a) => {
            json_only(cli.format, "saturation")?;
            saturation(a, out)
        }
        Command::Boundary(a) => boundary(a, cli.format, out),
        Command::Robustness(a) => {
            json_only(cli.format, "robustness")?;
            robustness(a, out)
        }
        Command::Maximin(a) => {
            json_only(cli.format, "maximin")?;
            maximin(a, out)
        }
        Command::Simulate(a) => simulate(a, cli.format, out),
    }
}

fn json_only(format: Format, cmd: &str) -> CmdResult {
    match format {
        Format::Json => Ok(()),
        Format::Csv => Err(Failure::invalid(
            "invalid_config",
            format!("`{cmd}` output is not tabular; use --format json"),
        )),
    }
}

fn io<E: std::fmt::Display>(e: E) -> Failure {
    Failure::invalid("io", e.to_string())
}

fn emit(out: Out, value: &impl Serialize) -> CmdResult {
    let text = serde_json::to_string_pretty(value).map_err(io)?;
    writeln!(out, "{text}").map_err(io)
}

fn emit_csv(out: Out, header: &[&str], rows: &[Vec<String>]) -> CmdResult {
    writeln!(out, "{}", header.join(",")).map_err(io)?;
    for r in rows {
        writeln!(out, "{}", r.join(",")).map_err(io)?;
    }
    Ok(())
}

fn parse_model(model: Option<&str>, k: usize) -> Result<ModelSpec, Failure> {
    Ok(match model {
        Some(m) => m.parse::<ModelSpec>()?,
        None => ModelSpec::main_effects(k)?,
    })
}

fn factors_for(n: usize) -> Result<usize, Failure> {
    if n < 2 || !n.is_power_of_two() {
        return Err(Failure::invalid(
            "dimension_mismatch",
            format!("expected 2^k values, got {n}"),
        ));
    }
    Ok(n.trailing_zeros() as usize)
}

fn level_label(model: &ModelSpec, point: usize) -> String {
    (1..=model.k())
        .map(|f| {
            if model.level(point, f) > 0.0 {
                '+'
            } else {
                '-'
            }
        })
        .collect()
}

fn weights(a: &WeightsArgs, format: Format, out: Out) -> CmdResult {
    let model = parse_model(a.model.as_deref(), a.k)?;
    let beta = Beta::new(a.beta.clone())?;
    let link: LinkKind = a.link.into();
    let eta = linear_predictor(&beta, &model)?;
    let w = weights_for_design(link, &beta, &model)?;
    match format {
        Format::Json => {
            let points: Vec<_> = (0..model.points())
                .map(|i| {
                    json!({
                        "index": i,
                        "levels": level_label(&model, i),
                        "eta": eta[i],
                        "w": w.as_slice()[i],
                    })
                })
                .collect();
            emit(
                out,
                &json!({
                    "link": link,
                    "beta": beta,
                    "effects": model.effects().iter().map(|e| e.to_string()).collect::<Vec<_>>(),
                    "w": w,
                    "points": points,
                }),
            )
        }
        Format::Csv => {
            let rows: Vec<Vec<String>> = (0..model.points())
                .map(|i| {
                    vec![
                        i.to_string(),
                        level_label(&model, i),
                        format_real(eta[i]),
                        format_real(w.as_slice()[i]),
                    ]
                })
                .collect();
            emit_csv(out, &["point", "levels", "eta", "w"], &rows)
        }
    }
}

fn four(values: &[f64], what: &'static str) -> Result<[f64; 4], Failure> {
    values.try_into().map_err(|_| {
        dopt2k::Error::DimensionMismatch {
            what,
            expected: 4,
            got: values.len(),
        }
        .into()
    })
}

fn input_weights(a: &InputArgs) -> Result<WeightVector, Failure> {
    if let Some(w) = &a.w {
        let w = four(w, "--w")?;
        return Ok(WeightVector::new(w.to_vec())?);
    }
    if let Some(v) = &a.v {
        return Ok(VarianceVector::new(four(v, "--v")?)?.to_weights());
    }
    if let (Some(link), Some(beta)) = (a.link, &a.beta) {
        let beta = Beta::new(beta.clone())?;
        return Ok(weights_for_design(
            link.into(),
            &beta,
            &ModelSpec::main_effects(2)?,
        )?);
    }
    Err(Failure::invalid(
        "invalid_config",
        "one of --w, --v or --link with --beta is required",
    ))
}

#[derive(Serialize)]
struct SolveOutput<'a> {
    w: &'a WeightVector,
    point_order: [&'static str; 4],
    #[serde(flatten)]
    result: &'a SolveResult,
}

fn solve_cmd(a: &SolveArgs, out: Out) -> CmdResult {
    let w = input_weights(&a.input)?;
    let opts = SolveOptions {
        numeric: NumericOptions {
            stationarity_tol: a.tol,
            grid_step: a.grid_step,
            ..NumericOptions::default()
        },
    };
    let result = solve(&w, &opts)?;
    emit(
        out,
        &SolveOutput {
            w: &w,
            point_order: POINT_ORDER_22,
            result: &result,
        },
    )?;
    match &result.certificate {
        Some(c) if !c.certified => Err(Failure::Certification {
            message: format!(
                "numeric optimum not certified: residual {:e} (tol {:e}), ordering_ok = {}, gap {:?}",
                c.stationarity_residual, c.stationarity_tol, c.ordering_ok, c.oracle_gap
            ),
        }),
        _ => Ok(()),
    }
}

#[derive(Deserialize)]
struct Reported {
    w: Vec<f64>,
    design: Vec<f64>,
    #[serde(rename = "L_value")]
    l_value: Option<f64>,
    det_value: f64,
}

fn validate(out: Out) -> CmdResult {
    let mut text = String::new();
    std::io::stdin().read_to_string(&mut text).map_err(io)?;
    let r: Reported = serde_json::from_str(&text).map_err(|e| {
        Failure::invalid("invalid_config", format!("cannot parse solve output: {e}"))
    })?;
    let w = WeightVector::new(r.w)?;
    let p = Design::new(r.design)?;
    let model = ModelSpec::main_effects(2)?;
    let det = det_criterion(&model, &w, &p)?;
    let (l, diff) = match r.l_value {
        Some(reported) => {
            let l = objective_l(&VarianceVector::from_weights(&w)?, &p)?;
            (Some(l), (l - reported).abs())
        }
        None => (None, (det - r.det_value).abs()),
    };
    let valid = diff <= VALIDATE_TOL;
    emit(
        out,
        &json!({
            "valid": valid,
            "L_reported": r.l_value,
            "L_recomputed": l,
            "det_reported": r.det_value,
            "det_recomputed": det,
            "abs_diff": diff,
            "tolerance": VALIDATE_TOL,
        }),
    )?;
    if valid {
        Ok(())
    } else {
        Err(Failure::invalid(
            "validation_mismatch",
            format!("recomputed value differs by {diff:e}"),
        ))
    }
}

fn saturation(a: &InputArgs, out: Out) -> CmdResult {
    let w = input_weights(a)?;
    let in_w = saturation_condition_w(&w)?;
    let in_beta = match (a.link, &a.beta) {
        (Some(link), Some(beta)) if LinkKind::from(link) == LinkKind::Logit => Some(
            saturation_condition_beta(LinkKind::Logit, &Beta::new(beta.clone())?)?,
        ),
        _ => None,
    };
    emit(
        out,
        &json!({
            "w": w,
            "holds": in_w.holds,
            "margin": in_w.margin,
            "beta_space": in_beta.as_ref().map(|r| json!({
                "holds": r.holds,
                "beta_thresholds": r.beta_thresholds,
            })),
        }),
    )
}

fn parse_range(spec: &str) -> Result<Vec<f64>, Failure> {
    let bad = || {
        Failure::invalid(
            "invalid_config",
            format!("expected START:STOP:N, got `{spec}`"),
        )
    };
    let parts: Vec<&str> = spec.split(':').collect();
    let [start, stop, n] = parts.as_slice() else {
        return Err(bad());
    };
    let start: f64 = start.trim().parse().map_err(|_| bad())?;
    let stop: f64 = stop.trim().parse().map_err(|_| bad())?;
    let n: usize = n.trim().parse().map_err(|_| bad())?;
    match n {
        0 => Err(bad()),
        1 => Ok(vec![start]),
        _ => Ok((0..n)
            .map(|i| start + (stop - start) * i as f64 / (n - 1) as f64)
            .collect()),
    }
}

fn boundary(a: &BoundaryArgs, format: Format, out: Out) -> CmdResult {
    let grid = match (&a.beta1, &a.beta1_range) {
        (Some(g), _) => g.clone(),
        (None, Some(r)) => parse_range(r)?,
        (None, None) => {
            return Err(Failure::invalid(
                "invalid_config",
                "one of --beta1 or --beta1-range is required",
            ))
        }
    };
    let points = saturation_boundary(a.beta0, &grid)?;
    match format {
        Format::Json => {
            let rows: Vec<_> = points
                .iter()
                .map(|p| {
                    json!({
                        "beta1": p.beta1,
                        "beta2_threshold": p.beta2_threshold,
                        "feasible": p.feasible(),
                    })
                })
                .collect();
            emit(out, &json!({ "beta0": a.beta0, "points": rows }))
        }
        Format::Csv => {
            let rows: Vec<Vec<String>> = points
                .iter()
                .map(|p| {
                    vec![
                        format_real(p.beta1),
                        p.beta2_threshold.map(format_real).unwrap_or_default(),
                        p.feasible().to_string(),
                    ]
                })
                .collect();
            emit_csv(out, &["beta1", "beta2_threshold", "feasible"], &rows)
        }
    }
}

fn robustness(a: &RobustnessArgs, out: Out) -> CmdResult {
    if let Some(regime) = a.regime {
        let (x, y) = (a.a.unwrap_or(f64::NAN), a.b.unwrap_or(f64::NAN));
        let regime = match regime {
            RegimeArg::Saturated => Regime::Saturated,
            RegimeArg::Unsaturated => Regime::Unsaturated,
        };
        let loss = max_uniform_loss(x, y, regime)?;
        return emit(
            out,
            &json!({ "regime": regime, "a": x, "b": y, "max_loss": loss }),
        );
    }
    let Some(w) = &a.w else {
        return Err(Failure::invalid(
            "invalid_config",
            "either --regime with --a and --b, or --w is required",
        ));
    };
    let w = WeightVector::new(w.clone())?;
    let model = parse_model(a.model.as_deref(), factors_for(w.len())?)?;
    if model.is_main_effects_22() {
        let report = uniform_loss_22(&w)?;
        emit(out, &json!({ "w": w, "report": report }))
    } else {
        let bounds = uniform_loss_bounds(&model, &w)?;
        emit(out, &json!({ "w": w, "bounds": bounds }))
    }
}

fn maximin(a: &MaximinArgs, out: Out) -> CmdResult {
    let w = WeightVector::new(a.w.clone())?;
    let model = parse_model(a.model.as_deref(), factors_for(w.len())?)?;
    let p = match &a.p {
        Some(p) => Design::new(p.clone())?,
        None => Design::uniform(model.points()),
    };
    let bound = maximin_lower_bound(&model, &w, &p)?;
    let at_uniform = maximin_lower_bound(&model, &w, &Design::uniform(model.points()))?;
    let det = det_criterion(&model, &w, &p)?;
    emit(
        out,
        &json!({
            "w": w,
            "design": p,
            "lower_bound": bound,
            "det_value": det,
            "uniform_lower_bound": at_uniform,
            "efficiency_bound": uniform_efficiency_bound(&w).ok(),
        }),
    )
}

fn simulate(a: &SimulateArgs, format: Format, out: Out) -> CmdResult {
    let experiment = match a.experiment {
        ExperimentArg::SaturationRate => Experiment::SaturationRate,
        ExperimentArg::ApproxLoss => Experiment::ApproxLoss,
    };
    let default_n = match experiment {
        Experiment::SaturationRate => 100_000,
        Experiment::ApproxLoss => 1000,
    };
    let mut cfg = SimConfig::defaults_for(experiment, a.n.unwrap_or(default_n), a.seed);
    if let Some(lo) = a.w_low {
        cfg.w_low = lo;
    }
    if let Some(hi) = a.w_high {
        cfg.w_high = hi;
    }
    cfg.link = a.link.map(Into::into);
    cfg.beta_range = a.beta_range;
    cfg.retain_records = a.records || format == Format::Csv;
    let summary = simulation::run(&cfg)?;
    match format {
        Format::Json => emit(out, &json!({ "config": cfg, "summary": summary })),
        Format::Csv => {
            let bytes = simulation::export_records(&summary, ExportFormat::Csv)?;
            out.write_all(&bytes).map_err(io)
        }
    }
}
