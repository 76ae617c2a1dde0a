use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use skrein::asymptotics::{
    extract_base_trace_series, extract_h_series, fit_trace_curve, predict_heat_expansion,
    FitReport, FreeExponent, HeatExpansion, LatticeExponent,
};
use skrein::green_krein::krein_residual_with;
use skrein::heattrace::{heat_trace_diff, TraceCurve};
use skrein::numerics::geometric_grid;
use skrein::spectrum::eigenvalues_in;
use skrein::ExtensionParam;

use crate::config::RunConfig;
use crate::output::{Cell, Format, OutDir, Table};
use crate::CliError;

/// Outcome of a command that ran to completion.
pub enum Verdict {
    Ok,
    CheckFailed(String),
}

pub fn spectrum(cfg: &RunConfig, out: &mut OutDir, format: Format) -> Result<Verdict, CliError> {
    let results: Vec<_> = cfg
        .thetas
        .par_iter()
        .map(|&th| eigenvalues_in(&cfg.spec, th, -cfg.z_max, cfg.lambda_max))
        .collect::<Result<_, _>>()?;
    for r in results {
        let mut t = Table::new(&["n", "lambda", "residual"]);
        for (i, (l, res)) in r.eigenvalues.iter().zip(&r.residuals).enumerate() {
            t.push(vec![Cell::Int(i + 1), Cell::Num(*l), Cell::Num(*res)]);
        }
        out.write(
            &format!("spectrum_{}.{}", r.extension.label(), format.ext()),
            &t.render(format),
        )?;
    }
    Ok(Verdict::Ok)
}

struct Sample {
    theta: f64,
    lambda: f64,
    x: f64,
    x_prime: f64,
}

/// One fixed point per configured finite θ, then `samples` random draws.
fn krein_samples(cfg: &RunConfig) -> Vec<Sample> {
    let r = cfg.spec.trunc_radius;
    let (zlo, zhi) = cfg.z_range;
    let mut out: Vec<Sample> = cfg
        .thetas
        .iter()
        .filter_map(|th| match th {
            ExtensionParam::Finite(t) => Some(Sample {
                theta: *t,
                lambda: -(zlo * zhi).sqrt(),
                x: 0.3 * r,
                x_prime: 0.6 * r,
            }),
            ExtensionParam::Infinity => None,
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for _ in 0..cfg.samples {
        let theta = rng.gen_range(cfg.theta_range.0..cfg.theta_range.1);
        let z: f64 = rng.gen_range(zlo..zhi);
        let x = rng.gen_range(0.05..0.95) * r;
        let x_prime = rng.gen_range(0.05..0.95) * r;
        out.push(Sample {
            theta,
            lambda: -z,
            x,
            x_prime,
        });
    }
    out
}

pub fn krein_check(
    cfg: &RunConfig,
    out: &mut OutDir,
    format: Format,
    corrupt_k: bool,
) -> Result<Verdict, CliError> {
    let samples = krein_samples(cfg);
    let map = move |k: f64| if corrupt_k { 1.01 * k } else { k };
    let residuals: Vec<f64> = samples
        .par_iter()
        .map(|s| krein_residual_with(&cfg.spec, s.theta, s.lambda, s.x, s.x_prime, map))
        .collect::<Result<_, _>>()?;
    let mut t = Table::new(&["theta", "lambda", "x", "x_prime", "residual"]);
    for (s, r) in samples.iter().zip(&residuals) {
        t.push(vec![
            Cell::Num(s.theta),
            Cell::Num(s.lambda),
            Cell::Num(s.x),
            Cell::Num(s.x_prime),
            Cell::Num(*r),
        ]);
    }
    out.write(
        &format!("krein_residuals.{}", format.ext()),
        &t.render(format),
    )?;
    let max = residuals.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    println!("max_residual={max:e}");
    if max < cfg.krein_threshold {
        Ok(Verdict::Ok)
    } else {
        Ok(Verdict::CheckFailed(format!(
            "Krein identity residual {max:e} not below threshold {:e}",
            cfg.krein_threshold
        )))
    }
}

fn finite(th: ExtensionParam, what: &str) -> Result<(), CliError> {
    if th == ExtensionParam::Infinity {
        return Err(CliError::Config(format!(
            "{what} needs finite theta values"
        )));
    }
    Ok(())
}

fn trace_table(c: &TraceCurve) -> Table {
    let mut t = Table::new(&["t", "value", "tail_bound"]);
    for i in 0..c.len() {
        t.push(vec![
            Cell::Num(c.t_grid[i]),
            Cell::Num(c.values[i]),
            Cell::Num(c.tail_bounds[i]),
        ]);
    }
    t
}

pub fn heat_trace(cfg: &RunConfig, out: &mut OutDir, format: Format) -> Result<Verdict, CliError> {
    for &th in &cfg.thetas {
        finite(th, "heat-trace")?;
    }
    for &th in &cfg.thetas {
        let c = heat_trace_diff(&cfg.spec, th, &cfg.t_grid)?;
        let text = match format {
            Format::Csv => c.to_csv(),
            f => trace_table(&c).render(f),
        };
        out.write(&format!("trace_{}.{}", th.label(), format.ext()), &text)?;
    }
    Ok(Verdict::Ok)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ExpansionMode {
    Predict,
    Fit,
    Compare,
}

fn predict(cfg: &RunConfig, th: ExtensionParam) -> Result<HeatExpansion, CliError> {
    let nu = cfg.spec.nu();
    let h = extract_h_series(&cfg.spec, &cfg.z_grid, cfg.max_k)?;
    let b = extract_base_trace_series(&cfg.spec, &cfg.z_grid, cfg.base_max_k)?;
    Ok(predict_heat_expansion(nu, th, &h, &b, cfg.truncation)?)
}

/// Small-t grid used for fits unless `t_grid` is set explicitly.
fn fit_grid(cfg: &RunConfig) -> Vec<f64> {
    if cfg.entries.contains_key("t_grid") {
        cfg.t_grid.clone()
    } else {
        geometric_grid(1e-5, 1e-2, 40)
    }
}

fn basis(cfg: &RunConfig) -> Vec<LatticeExponent> {
    let mut b: Vec<LatticeExponent> = (0..cfg.fit_half_integers)
        .map(|p| LatticeExponent::new(p, 0))
        .collect();
    b.extend((1..=cfg.fit_anomalous).map(|q| LatticeExponent::new(0, q)));
    if b.is_empty() {
        b.push(LatticeExponent::ZERO);
    }
    b
}

fn fit(cfg: &RunConfig, th: ExtensionParam, free: bool) -> Result<FitReport, CliError> {
    let mut curve = heat_trace_diff(&cfg.spec, th, &fit_grid(cfg))?;
    if let Some((lo, hi)) = cfg.fit_window {
        curve = curve.window(lo, hi);
    }
    let free = if free {
        cfg.free_exponent.map(FreeExponent::seeded)
    } else {
        None
    };
    Ok(fit_trace_curve(&curve, cfg.spec.nu(), &basis(cfg), free)?)
}

/// `stem.ext` for a single θ, `stem_{θ}.ext` otherwise.
fn name(cfg: &RunConfig, stem: &str, th: ExtensionParam, ext: &str) -> String {
    if cfg.thetas.len() == 1 {
        format!("{stem}.{ext}")
    } else {
        format!("{stem}_{}.{ext}", th.label())
    }
}

struct CompareRow {
    exponent: String,
    value: f64,
    predicted: f64,
    fitted: f64,
    relative_gap: Option<f64>,
}

fn exponent_label(e: LatticeExponent) -> String {
    match (e.p, e.q) {
        (0, 0) => "1".to_string(),
        (p, 0) => format!("t^({p}/2)"),
        (0, q) => format!("t^({q}nu)"),
        (p, q) => format!("t^({p}/2+{q}nu)"),
    }
}

pub fn expansion(
    cfg: &RunConfig,
    out: &mut OutDir,
    format: Format,
    mode: ExpansionMode,
) -> Result<Verdict, CliError> {
    if mode != ExpansionMode::Predict {
        for &th in &cfg.thetas {
            finite(th, "expansion fit")?;
        }
    }
    let mut failures = Vec::new();
    for &th in &cfg.thetas {
        match mode {
            ExpansionMode::Predict => {
                let e = predict(cfg, th)?;
                for w in &e.warnings {
                    eprintln!("warning: {w}");
                }
                out.write_json(&name(cfg, "expansion", th, "json"), &e.to_json())?;
            }
            ExpansionMode::Fit => {
                let r = fit(cfg, th, true)?;
                out.write_json(&name(cfg, "fit_report", th, "json"), &r)?;
            }
            ExpansionMode::Compare => {
                let e = predict(cfg, th)?;
                let r = fit(cfg, th, false)?;
                let nu = cfg.spec.nu();
                let mut rows = Vec::new();
                for b in basis(cfg) {
                    let predicted = e.coefficient(b);
                    let fitted = r.coefficient(b).unwrap_or(0.0);
                    let relative_gap = (predicted != 0.0).then(|| (fitted / predicted - 1.0).abs());
                    let gate = match (b.p, b.q) {
                        (0, 0) => Some(cfg.threshold_constant),
                        (0, 1) if th != ExtensionParam::Finite(0.0) => {
                            Some(cfg.threshold_anomalous)
                        }
                        _ => None,
                    };
                    if let Some(tol) = gate {
                        if !relative_gap.is_some_and(|g| g <= tol) {
                            failures.push(format!(
                                "theta={}: {} gap {relative_gap:?} above {tol}",
                                th.label(),
                                exponent_label(b)
                            ));
                        }
                    }
                    rows.push(CompareRow {
                        exponent: exponent_label(b),
                        value: b.value(nu),
                        predicted,
                        fitted,
                        relative_gap,
                    });
                }
                let mut t =
                    Table::new(&["exponent", "value", "predicted", "fitted", "relative_gap"]);
                for row in &rows {
                    t.push(vec![
                        Cell::Text(row.exponent.clone()),
                        Cell::Num(row.value),
                        Cell::Num(row.predicted),
                        Cell::Num(row.fitted),
                        row.relative_gap.map_or(Cell::Text("nan".into()), Cell::Num),
                    ]);
                }
                print!("theta={}\n{}", th.label(), t.render(Format::Dat));
                out.write(&name(cfg, "compare", th, format.ext()), &t.render(format))?;
            }
        }
    }
    if failures.is_empty() {
        Ok(Verdict::Ok)
    } else {
        Ok(Verdict::CheckFailed(failures.join("; ")))
    }
}
