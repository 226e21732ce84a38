//! Acceptance suite: one line per criterion, exit status 1 if any fails.
//!
//! Run with `cargo test --test acceptance`.

use std::path::PathBuf;
use std::process::Command;
use std::time::{Duration, Instant};

use charflow::charfield::{char_field, poisson, poisson_bracket, t_hat, Hamiltonian};
use charflow::field::VectorField;
use charflow::flow::{flow_coords, IntegratorConfig};
use charflow::gradsys::{certify_stationarity, CertifyOptions, Certificate, DEFAULT_FD_STEP};
use charflow::lie::{check_closure, check_lemma1, ClosureMode};
use charflow::sampling::ball;
use charflow::space::VarContext;
use charflow::stationary::{check_compatibility, check_level, check_transversality, transversality_matrix};
use charflow::Problem;
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Verdict = Result<String, String>;
type Criterion = (&'static str, fn() -> Verdict);

fn problem_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("problems").join(name)
}

fn load(name: &str) -> Problem {
    Problem::load(problem_path(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn charflow(args: &[&str], threads: &str) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_charflow"))
        .args(args)
        .env("CHARFLOW_THREADS", threads)
        .output()
        .expect("binary runs")
}

fn ensure(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(limit: Duration, started: Instant) -> Result<String, String> {
    let spent = started.elapsed();
    let text = format!("{:.2} s", spent.as_secs_f64());
    if spent <= limit {
        Ok(text)
    } else {
        Err(format!("{text} exceeds {:.0} s", limit.as_secs_f64()))
    }
}

fn norm_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Random polynomial of degree ≤ 2 per variable in the reduced n = 2 space.
fn random_polynomial(rng: &mut ChaCha8Rng) -> String {
    const VARS: [&str; 4] = ["x1", "x2", "p1", "p2"];
    let terms = rng.random_range(1..=5);
    let mut out = Vec::with_capacity(terms);
    for _ in 0..terms {
        let mut t = format!("{:.6}", rng.random_range(-1.0..1.0));
        for v in VARS {
            match rng.random_range(0..3) {
                0 => {}
                1 => t.push_str(&format!("*{v}")),
                k => t.push_str(&format!("*{v}^{k}")),
            }
        }
        out.push(t);
    }
    out.join(" + ")
}

fn bracket_identities() -> Verdict {
    let started = Instant::now();
    let ctx = VarContext::reduced(2);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let points = ball(&[0.0; 4], 1.0, 20, 2);
    let (pairs, mut anti, mut identity) = (100, 0.0f64, 0.0f64);
    for _ in 0..pairs {
        let h1 = Hamiltonian::parse(&random_polynomial(&mut rng), ctx).unwrap();
        let h2 = Hamiltonian::parse(&random_polynomial(&mut rng), ctx).unwrap();
        let bracket = charflow::lie::lie_bracket(&char_field(&h1), &char_field(&h2)).unwrap();
        let hb = poisson_bracket(&h1, &h2).unwrap();
        for z in &points {
            let zp = charflow::PhasePoint::new(ctx, z.clone()).unwrap();
            anti = anti.max((poisson(&h1, &h2, &zp).unwrap() + poisson(&h2, &h1, &zp).unwrap()).abs());
            let rhs = t_hat(2) * DVector::from_vec(hb.gradient_at(z).unwrap());
            identity = identity.max(norm_diff(&bracket.eval(z).unwrap(), rhs.as_slice()));
        }
    }
    let time = within(Duration::from_secs(10), started)?;
    ensure(
        anti <= 1e-12 && identity <= 1e-9,
        format!("{pairs} pairs x {} points: antisymmetry {anti:.1e} (≤1e-12), field identity {identity:.1e} (≤1e-9), {time}", points.len()),
    )
}

fn linear_lifts() -> Verdict {
    let base = VarContext::base(2);
    let f0 = VectorField::parse(base, &["x1", "x2"]).unwrap();
    let fields = [
        VectorField::parse(base, &["x1", "0"]).unwrap(),
        VectorField::parse(base, &["0", "2*x2"]).unwrap(),
    ];
    let grid = ball(&[0.0; 4], 1.0, 50, 3);
    let r = check_lemma1(&fields, &f0, &grid, 1e-12).unwrap();
    let alpha = r
        .closure
        .pairs
        .iter()
        .filter_map(|p| match &p.coefficients {
            charflow::lie::Coefficients::Constant(c) => Some(c.iter().fold(0.0f64, |m, v| m.max(v.abs()))),
            charflow::lie::Coefficients::Pointwise(_) => None,
        })
        .fold(0.0f64, f64::max);
    ensure(
        r.pass && alpha <= 1e-12 && r.closure.max_residual <= 1e-12 && r.lift_residual <= 1e-9,
        format!(
            "commute {:.1e}, closure {:.1e}, max |α| {alpha:.1e} (≤1e-12); lifted brackets {:.1e} (≤1e-9) at {} points",
            r.commute_residual,
            r.closure.max_residual,
            r.lift_residual,
            grid.len()
        ),
    )
}

fn finite_type() -> Verdict {
    let p = load("so3.toml");
    let grid = p.sample_grid();
    let fields = p.generator_fields();
    let r = check_closure(&fields, ClosureMode::Constants, &grid, 1e-8).unwrap();
    let mut magnitude_err = 0.0f64;
    for (i, j, k) in [(0, 1, 2), (0, 2, 1), (1, 2, 0)] {
        let a = r.alpha(i, j, k).ok_or("missing coefficient")?;
        magnitude_err = magnitude_err.max((a.abs() - 1.0).abs());
        for other in [i, j] {
            magnitude_err = magnitude_err.max(r.alpha(i, j, other).unwrap().abs());
        }
    }

    let mut mutated = fields.clone();
    let mut third = mutated[2].to_strings();
    let last = third.len() - 1;
    third[last] = format!("{} + x1^2", third[last]);
    mutated[2] = VectorField::parse(p.ctx, &third).unwrap();
    let broken = check_closure(&mutated, ClosureMode::Constants, &grid, 1e-8).unwrap();
    let fixture = load("so3_broken.toml");
    let broken_fixture = check_closure(&fixture.generator_fields(), ClosureMode::Constants, &fixture.sample_grid(), 1e-8).unwrap();
    ensure(
        r.pass && grid.len() >= 50 && magnitude_err <= 1e-6 && broken.max_residual > 1e-3 && broken_fixture.max_residual > 1e-3,
        format!(
            "so(3) closure {:.1e} on {} points, ||α|-1| {magnitude_err:.1e}; mutated {:.2e}, broken fixture {:.2e} (>1e-3)",
            r.max_residual,
            grid.len(),
            broken.max_residual,
            broken_fixture.max_residual
        ),
    )
}

fn certify(p: &Problem) -> Result<Certificate, String> {
    let opts = CertifyOptions {
        points_per_axis: 11,
        tolerance: p.tolerances.stationarity,
        rank_threshold: p.tolerances.rank,
        fd_step: DEFAULT_FD_STEP,
    };
    let orbit = p.orbit().map_err(|e| e.to_string())?;
    certify_stationarity(&orbit, &p.h0, &opts).map_err(|e| e.to_string())
}

fn stationarity() -> Verdict {
    let started = Instant::now();
    let p = load("oscillator.toml");
    if p.radii != [0.5, 0.5] || p.generators.len() != 2 {
        return Err("shipped oscillator does not match the stated setup".into());
    }
    let cert = certify(&p)?;
    let a0 = cert.identity_error.ok_or("origin is not on the grid")?;
    let broken = certify(&load("oscillator_broken.toml"))?;
    let path = problem_path("oscillator_broken.toml");
    let exit = charflow(&["certify", path.to_str().unwrap()], "1").status.code();
    let time = within(Duration::from_secs(30), started)?;
    ensure(
        cert.pass && cert.max_drift <= 1e-6 && a0 <= 1e-6 && broken.max_drift > 1e-3 && exit == Some(1),
        format!(
            "oscillator drift {:.1e} (≤1e-6), |A(0)-I| {a0:.1e} (≤1e-6); mutated drift {:.2e} (>1e-3), exit {exit:?}; {time}",
            cert.max_drift, broken.max_drift
        ),
    )
}

fn coherence() -> Verdict {
    let mut parts = Vec::new();
    let mut ok = true;
    let mut coherent_rows = 0;
    for name in ["oscillator.toml", "so3.toml", "linear_lifts.toml", "transport_full.toml", "eikonal.toml"] {
        let cert = certify(&load(name)).map_err(|e| format!("{name}: {e}"))?;
        let rows = cert.rows.iter().filter(|r| r.sigma_min_a > 0.1).count();
        coherent_rows += rows;
        ok &= cert.max_coherent_defect <= 1e-5;
        parts.push(format!("{} {:.1e} ({rows} pts)", name.trim_end_matches(".toml"), cert.max_coherent_defect));
    }
    ensure(ok && coherent_rows > 0, format!("max defect where σ_min(A) > 0.1 (≤1e-5): {}", parts.join(", ")))
}

fn integrator() -> Verdict {
    let h = Hamiltonian::parse("(p1^2 + x1^2)/2", VarContext::reduced(1)).unwrap();
    let z = char_field(&h).into_field();
    let t = 10.0f64;
    let exact = [t.cos(), -t.sin()];
    let steps = [0.1, 0.05, 0.02, 0.01, 0.005];
    let mut logs = Vec::new();
    for &step in &steps {
        let y = flow_coords(&z, t, &[1.0, 0.0], &IntegratorConfig::rk4(step)).unwrap();
        logs.push((step.ln(), norm_diff(&y, &exact).ln()));
    }
    let n = logs.len() as f64;
    let (mx, my) = (logs.iter().map(|l| l.0).sum::<f64>() / n, logs.iter().map(|l| l.1).sum::<f64>() / n);
    let slope = logs.iter().map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / logs.iter().map(|(x, _)| (x - mx) * (x - mx)).sum::<f64>();

    let pendulum = Hamiltonian::parse("p1^2/2 - cos(x1)", VarContext::reduced(1)).unwrap();
    let cfg = IntegratorConfig::default();
    let mut reversal = 0.0f64;
    for (field, y) in [(&z, [1.0, 0.0]), (&char_field(&pendulum).into_field(), [0.5, 1.2])] {
        for t in [0.5, 2.0, 5.0] {
            let fwd = flow_coords(field, t, &y, &cfg).unwrap();
            let back = flow_coords(field, -t, &fwd, &cfg).unwrap();
            reversal = reversal.max(norm_diff(&back, &y));
        }
    }
    ensure(
        (slope - 4.0).abs() <= 0.2 && reversal <= 1e-7,
        format!("RK4 order {slope:.3} (4.0±0.2), reversibility {reversal:.1e} (≤1e-7)"),
    )
}

fn cauchy() -> Verdict {
    let p = load("eikonal.toml");
    let section = p.cauchy.as_ref().ok_or("eikonal has no [cauchy] section")?;
    let grid = section.data.grid(section.points_per_axis).unwrap();
    let compat = check_compatibility(&section.data, &grid, 1e-12).unwrap();
    let level = check_level(&section.data, &p.h0, &p.z0, &grid, 1e-12).unwrap();
    let trans = check_transversality(&section.data, &p.h0, &grid, p.tolerances.transversality).unwrap();
    let det_err = grid
        .iter()
        .map(|l| (transversality_matrix(&section.data, &p.h0, l).unwrap().determinant().abs() - 2.0).abs())
        .fold(0.0f64, f64::max);
    let mut ok = compat.pass && level.pass && trans.pass && det_err <= 1e-9;

    let mut variants = Vec::new();
    for (name, expected) in [
        ("eikonal_broken_compat.toml", "compatibility"),
        ("eikonal_broken_level.toml", "level"),
        ("eikonal_broken_transversality.toml", "transversality"),
    ] {
        let b = load(name);
        let s = b.cauchy.as_ref().unwrap();
        let g = s.data.grid(s.points_per_axis).unwrap();
        let tol = b.tolerances;
        let failing: Vec<&str> = [
            ("compatibility", check_compatibility(&s.data, &g, tol.cauchy).unwrap().pass),
            ("level", check_level(&s.data, &b.h0, &b.z0, &g, tol.cauchy).unwrap().pass),
            ("transversality", check_transversality(&s.data, &b.h0, &g, tol.transversality).unwrap().pass),
        ]
        .into_iter()
        .filter(|(_, pass)| !pass)
        .map(|(n, _)| n)
        .collect();
        ok &= failing == [expected];
        variants.push(format!("{expected} variant fails {failing:?}"));
    }
    ensure(
        ok,
        format!(
            "compatibility {:.1e}, level {:.1e} (≤1e-12), ||det|-2| {det_err:.1e} (≤1e-9); {}",
            compat.max_residual,
            level.max_residual,
            variants.join(", ")
        ),
    )
}

fn determinism() -> Verdict {
    let dir = std::env::temp_dir().join(format!("charflow-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    let runs = [
        ("orbit", "oscillator.toml"),
        ("certify", "so3.toml"),
        ("check", "linear_lifts.toml"),
        ("cauchy", "eikonal.toml"),
        ("orbit", "divergent.toml"),
    ];
    let mut compared = 0;
    let mut mismatches = Vec::new();
    for (command, file) in runs {
        let input = problem_path(file);
        let mut outputs = Vec::new();
        for (run, threads) in ["1", "1", "2", "8"].into_iter().enumerate() {
            let json = dir.join(format!("{command}-{file}-{run}.json"));
            let csv = dir.join(format!("{command}-{file}-{run}.csv"));
            let mut args = vec![command, input.to_str().unwrap(), "--json", json.to_str().unwrap()];
            if command == "orbit" {
                args.extend(["--csv", csv.to_str().unwrap()]);
            }
            charflow(&args, threads);
            let read = |p: &PathBuf| std::fs::read(p).unwrap_or_default();
            outputs.push((read(&json), read(&csv)));
        }
        if outputs[0].0.is_empty() {
            mismatches.push(format!("{command} {file}: no report"));
        }
        for o in &outputs[1..] {
            compared += 1;
            if *o != outputs[0] {
                mismatches.push(format!("{command} {file}"));
            }
        }
    }
    let _ = std::fs::remove_dir_all(&dir);
    ensure(
        mismatches.is_empty(),
        format!("{compared} reruns (threads 1, 1, 2, 8) byte-identical; mismatches: {mismatches:?}"),
    )
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("bracket identities", bracket_identities),
        ("linear-in-momentum generators", linear_lifts),
        ("finite-type closure", finite_type),
        ("stationarity certificate", stationarity),
        ("gradient-system coherence", coherence),
        ("integrator validation", integrator),
        ("Cauchy data", cauchy),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let (tag, detail) = match check() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("[{tag}] {}. {name}: {detail}", i + 1);
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
