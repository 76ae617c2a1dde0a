//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use skrein::asymptotics::{
    extract_base_trace_series, extract_h_series, fit_trace_curve, predict_heat_expansion,
    FreeExponent, LatticeExponent,
};
use skrein::green_krein::{
    free_krein_constant, krein_k, krein_residual, resolvent_trace_diff,
    resolvent_trace_diff_via_krein,
};
use skrein::heattrace::{
    default_t_grid, heat_trace_diff, heat_trace_from_spectra, laplace_transform,
};
use skrein::numerics::geometric_grid;
use skrein::specfun::bessel_j_zeros;
use skrein::spectrum::{eigenvalues, eigenvalues_calogero, CalogeroBranch};
use skrein::{ExtensionParam, ProblemSpec};

/// Outcome of one criterion: pass flag and a one-line summary.
type Outcome = (bool, String);

fn first_n(spec: &ProblemSpec, ext: ExtensionParam, n: usize, guess: f64) -> Vec<f64> {
    let mut lmax = guess;
    loop {
        let s = eigenvalues(spec, ext, lmax).expect("spectrum");
        if s.len() >= n {
            return s.eigenvalues[..n].to_vec();
        }
        lmax *= 2.0;
    }
}

/// 1. Krein identity over random (θ, λ, x, x') for V ∈ {0, x}, ν ∈ {0.3, 0.7}.
fn krein_identity() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(20240601);
    let mut worst: f64 = 0.0;
    for coeffs in [vec![], vec![0.0, 1.0]] {
        for nu in [0.3, 0.7] {
            let spec = ProblemSpec::new(nu, coeffs.clone(), 1.0).unwrap();
            for _ in 0..100 {
                let theta = rng.gen_range(-1.0..10.0);
                let z: f64 = rng.gen_range(2.0..50.0);
                let x = rng.gen_range(0.05..0.95);
                let y = rng.gen_range(0.05..0.95);
                let r = krein_residual(&spec, theta, -z, x, y).expect("residual");
                worst = worst.max(r.abs());
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    (
        worst < 1e-8 && secs < 30.0,
        format!("max_residual={worst:.3e} (< 1e-8) over 400 samples in {secs:.2}s (< 30s)"),
    )
}

/// 2. K(z)·z^ν / (4^ν Γ(1+ν)/Γ(1-ν)) = 1 for V = 0.
fn krein_closed_form() -> Outcome {
    let mut worst: f64 = 0.0;
    for nu in [0.3, 0.5, 0.7] {
        let spec = ProblemSpec::half_line(nu, vec![]).unwrap();
        for z in [1.0f64, 10.0, 100.0] {
            let k = krein_k(&spec, z).expect("K");
            worst = worst.max((k * z.powf(nu) / free_krein_constant(nu) - 1.0).abs());
        }
    }
    (
        worst <= 1e-6,
        format!("max |ratio - 1| = {worst:.3e} (<= 1e-6)"),
    )
}

/// 3. Dirichlet spectra against squared Bessel zeros.
fn bessel_spectra() -> Outcome {
    let mut worst: f64 = 0.0;
    for nu in [0.3, 0.7] {
        let spec = ProblemSpec::new(nu, vec![], 1.0).unwrap();
        for (ext, order) in [
            (ExtensionParam::Infinity, nu),
            (ExtensionParam::Finite(0.0), -nu),
        ] {
            let zeros = bessel_j_zeros(order, 15).expect("zeros");
            let lambdas = first_n(&spec, ext, 15, (zeros[14] + 1.0).powi(2));
            for (l, j) in lambdas.iter().zip(&zeros) {
                worst = worst.max((l / (j * j) - 1.0).abs());
            }
        }
    }
    let spec = ProblemSpec::new(0.5, vec![], 1.0).unwrap();
    let lambdas = first_n(&spec, ExtensionParam::Infinity, 15, (16.0 * PI).powi(2));
    for (n, l) in lambdas.iter().enumerate() {
        worst = worst.max((l / ((n + 1) as f64 * PI).powi(2) - 1.0).abs());
    }
    (
        worst < 1e-8,
        format!("max relative error {worst:.3e} (< 1e-8), 15 levels"),
    )
}

/// 4. Harmonic ladders and the sinh trace at R = 12.
fn calogero() -> Outcome {
    let mut ladder: f64 = 0.0;
    let mut trace: f64 = 0.0;
    for nu in [0.3, 0.7] {
        let spec = ProblemSpec::new(nu, vec![0.0, 0.0, 1.0], 12.0).unwrap();
        for (ext, branch) in [
            (ExtensionParam::Finite(0.0), CalogeroBranch::ThetaZero),
            (ExtensionParam::Infinity, CalogeroBranch::ThetaInfinity),
        ] {
            let exact = eigenvalues_calogero(nu, branch, 11);
            let got = first_n(&spec, ext, 11, 50.0);
            for (g, e) in got.iter().zip(&exact) {
                ladder = ladder.max((g / e - 1.0).abs());
            }
        }
        let t = default_t_grid();
        let c = heat_trace_diff(&spec, ExtensionParam::Finite(0.0), &t).expect("trace");
        for (t, v) in t.iter().zip(&c.values) {
            trace = trace.max((v - (2.0 * nu * t).sinh() / (2.0 * t).sinh()).abs());
        }
    }
    (
        ladder < 1e-6 && trace < 1e-6,
        format!(
            "ladder max rel {ladder:.3e} (< 1e-6, n <= 10); trace max abs {trace:.3e} (< 1e-6)"
        ),
    )
}

fn anomalous_basis(n: i32) -> Vec<LatticeExponent> {
    (0..n).map(|q| LatticeExponent::new(0, q)).collect()
}

fn small_t_grid() -> Vec<f64> {
    geometric_grid(1e-5, 1e-2, 40)
}

/// 5. Free-exponent recovery of ν and the t^ν coefficient for V = 0, θ = 1.
fn anomalous_exponent() -> Outcome {
    let z = geometric_grid(20.0, 2e4, 24);
    let mut ok = true;
    let mut parts = Vec::new();
    for nu in [0.3, 0.7] {
        let spec = ProblemSpec::new(nu, vec![], 1.0).unwrap();
        let theta = ExtensionParam::Finite(1.0);
        let curve = heat_trace_diff(&spec, theta, &small_t_grid()).expect("trace");
        let basis = anomalous_basis(7);
        let free =
            fit_trace_curve(&curve, nu, &basis, Some(FreeExponent::seeded(0.5))).expect("free fit");
        let est = free.free_exponent.as_ref().unwrap().estimate;
        let fixed = fit_trace_curve(&curve, nu, &basis, None).expect("fit");
        let h = extract_h_series(&spec, &z, 6).expect("H");
        let b = extract_base_trace_series(&spec, &z, 8).expect("base");
        let pred = predict_heat_expansion(nu, theta, &h, &b, 3.0).expect("prediction");
        let e = LatticeExponent::new(0, 1);
        let gap = fixed.coefficient(e).unwrap() / pred.coefficient(e) - 1.0;
        ok &= (est - nu).abs() <= 0.02 && gap.abs() <= 0.02;
        parts.push(format!(
            "ν={nu}: estimate {est:.5} (±0.02), t^ν gap {:.3e} (<= 2%)",
            gap.abs()
        ));
    }
    (ok, parts.join("; "))
}

/// 6. θ = 0 fits leave anomalous coefficients negligible.
fn scale_invariant_suppression() -> Outcome {
    let mut worst: f64 = 0.0;
    for nu in [0.3, 0.7] {
        for coeffs in [vec![], vec![0.0, 1.0]] {
            let spec = ProblemSpec::new(nu, coeffs, 1.0).unwrap();
            let curve = heat_trace_diff(&spec, ExtensionParam::Finite(0.0), &small_t_grid())
                .expect("trace");
            let mut basis: Vec<_> = (0..8).map(|p| LatticeExponent::new(p, 0)).collect();
            basis.extend([LatticeExponent::new(0, 1), LatticeExponent::new(0, 2)]);
            let fit = fit_trace_curve(&curve, nu, &basis, None).expect("fit");
            let lead = fit.coefficient(LatticeExponent::ZERO).unwrap().abs();
            for q in [1, 2] {
                let c = fit.coefficient(LatticeExponent::new(0, q)).unwrap();
                worst = worst.max(c.abs() / lead);
            }
        }
    }
    (
        worst < 1e-3,
        format!("max anomalous/leading {worst:.3e} (< 1e-3)"),
    )
}

/// 7. The t^ν coefficient is linear in θ.
fn theta_structure() -> Outcome {
    let nu = 0.3;
    let spec = ProblemSpec::new(nu, vec![], 1.0).unwrap();
    let coeff = |theta: f64| {
        let c =
            heat_trace_diff(&spec, ExtensionParam::Finite(theta), &small_t_grid()).expect("trace");
        fit_trace_curve(&c, nu, &anomalous_basis(7), None)
            .expect("fit")
            .coefficient(LatticeExponent::new(0, 1))
            .unwrap()
    };
    let ratio = coeff(0.1) / coeff(0.05);
    (
        (ratio / 2.0 - 1.0).abs() <= 0.01,
        format!("ratio {ratio:.6} (2 within 1%)"),
    )
}

/// 8. Scaling covariance. Substituting x = sy maps A^θ on [0, R] with
/// eigenvalue λ to A^{θ s^{2ν}} on [0, R/s] with eigenvalue s²λ, so
/// s² λ_n(R, θ) = λ_n(R/s, θ s^{2ν}).
fn scaling_covariance() -> Outcome {
    let mut worst: f64 = 0.0;
    for nu in [0.3, 0.7] {
        let spec = ProblemSpec::new(nu, vec![], 1.0).unwrap();
        for theta in [-0.5, 0.0, 1.0, 4.0] {
            let base = first_n(&spec, ExtensionParam::Finite(theta), 15, 3000.0);
            for s in [0.5, 2.0] {
                let scaled = spec.with_radius(1.0 / s).unwrap();
                let other = first_n(
                    &scaled,
                    ExtensionParam::Finite(theta * s.powf(2.0 * nu)),
                    15,
                    3000.0 * s * s,
                );
                for (a, b) in base.iter().zip(&other) {
                    worst = worst.max((s * s * a - b).abs() / b.abs());
                }
            }
        }
    }
    (
        worst < 1e-8,
        format!("max relative defect {worst:.3e} (< 1e-8)"),
    )
}

/// 9. Diagonal vs Krein-factor trace routes, and Laplace of the trace curve.
fn internal_consistency() -> Outcome {
    let mut route: f64 = 0.0;
    for nu in [0.3, 0.7] {
        for coeffs in [vec![], vec![0.0, 1.0]] {
            let spec = ProblemSpec::new(nu, coeffs, 1.0).unwrap();
            for theta in [-0.5, 1.0, 5.0] {
                for z in [5.0, 20.0, 50.0] {
                    let a = resolvent_trace_diff(&spec, ExtensionParam::Finite(theta), z)
                        .expect("direct");
                    let b = resolvent_trace_diff_via_krein(&spec, theta, z).expect("krein");
                    route = route.max((a - b).abs() / b.abs());
                }
            }
        }
    }
    let spec = ProblemSpec::new(0.3, vec![0.0, 1.0], 1.0).unwrap();
    let theta = ExtensionParam::Finite(1.0);
    let t = geometric_grid(1e-4, 20.0, 120);
    let lmax = 40.0 / t[0];
    let a = eigenvalues(&spec, theta, lmax).expect("spectrum");
    let b = eigenvalues(&spec, ExtensionParam::Infinity, lmax).expect("spectrum");
    let curve = heat_trace_from_spectra(&a, &b, &t).expect("trace");
    let mut laplace: f64 = 0.0;
    for z in geometric_grid(5.0, 50.0, 6) {
        let l = laplace_transform(&curve, &a, &b, z).expect("laplace");
        let r = resolvent_trace_diff(&spec, theta, z).expect("trace");
        laplace = laplace.max((l / r - 1.0).abs());
    }
    (
        route < 1e-7 && laplace < 0.01,
        format!("route max rel {route:.3e} (< 1e-7); Laplace max rel {laplace:.3e} (< 1%)"),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("Krein identity", krein_identity),
        ("K closed form", krein_closed_form),
        ("Bessel spectra", bessel_spectra),
        ("Calogero oracle", calogero),
        ("anomalous exponent", anomalous_exponent),
        ("scale-invariant extensions", scale_invariant_suppression),
        ("theta structure", theta_structure),
        ("scaling covariance", scaling_covariance),
        ("internal consistency", internal_consistency),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (ok, msg) = match catch_unwind(AssertUnwindSafe(f)) {
            Ok(r) => r,
            Err(e) => {
                let why = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                (false, format!("panicked: {why}"))
            }
        };
        if !ok {
            failed += 1;
        }
        println!(
            "criterion {} [{name}]: {} {msg} [{:.1}s]",
            i + 1,
            if ok { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
