//! Property tests for the algebraic and numerical invariants.

use charflow::charfield::{char_field, poisson, poisson_bracket, t_hat, t_matrix, Hamiltonian};
use charflow::expr::parse;
use charflow::field::VectorField;
use charflow::flow::{flow_coords, IntegratorConfig};
use charflow::lie::{cotangent_lift, lie_bracket, momentum_hamiltonian};
use charflow::space::{PhasePoint, VarContext};
use charflow::stationary::{check_compatibility, check_transversality, CauchyData};
use nalgebra::DVector;
use proptest::prelude::*;

fn red(n: usize) -> VarContext {
    VarContext::reduced(n)
}

/// Random expression source over `vars`, depth ≤ `depth`. Singular
/// functions only see arguments bounded away from their singularities.
fn expr_source(vars: &'static [&'static str], depth: u32) -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        prop::sample::select(vars).prop_map(str::to_string),
        (-3.0f64..3.0).prop_map(|c| format!("{:.3}", c)),
        (1i32..5).prop_map(|k| k.to_string()),
    ];
    leaf.prop_recursive(depth, 64, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a}) + ({b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a}) - ({b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a}) * ({b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a}) / (1 + ({b})^2)")),
            (inner.clone(), 2u32..4).prop_map(|(a, k)| format!("({a})^{k}")),
            inner.clone().prop_map(|a| format!("-({a})")),
            inner.clone().prop_map(|a| format!("sin({a})")),
            inner.clone().prop_map(|a| format!("cos({a})")),
            inner.clone().prop_map(|a| format!("exp(sin({a}))")),
            inner.clone().prop_map(|a| format!("log(1 + ({a})^2)")),
            inner.clone().prop_map(|a| format!("sqrt(2 + sin({a}))")),
        ]
    })
}

const VARS2: &[&str] = &["x1", "x2", "p1", "p2"];

fn point(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.5f64..1.5, d)
}

/// Polynomial of degree ≤ 3 in the given variables.
fn polynomial(vars: &'static [&'static str]) -> impl Strategy<Value = String> {
    let monomial = (
        -2.0f64..2.0,
        prop::collection::vec(0u32..3, vars.len()),
    )
        .prop_map(move |(c, powers)| {
            let mut s = format!("{c:.4}");
            for (v, k) in vars.iter().zip(powers) {
                if k > 0 {
                    s.push_str(&format!("*{v}^{k}"));
                }
            }
            s
        });
    prop::collection::vec(monomial, 1..5).prop_map(|ms| ms.join(" + "))
}

fn ham(src: &str, n: usize) -> Hamiltonian {
    Hamiltonian::parse(src, red(n)).unwrap()
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * x.abs().max(y.abs()).max(1.0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn derivative_matches_central_differences(src in expr_source(VARS2, 6), z in point(4), v in 0usize..4) {
        let ctx = red(2);
        let e = parse(&src, &ctx).unwrap();
        let f = e.eval(&z).unwrap();
        prop_assume!(f.is_finite() && f.abs() < 1e2);
        let exact = e.diff(v).eval(&z).unwrap();
        let h = 1e-6 * z[v].abs().max(1.0);
        let (mut a, mut b) = (z.clone(), z.clone());
        a[v] += h;
        b[v] -= h;
        let fd = (e.eval(&a).unwrap() - e.eval(&b).unwrap()) / (2.0 * h);
        prop_assert!((fd - exact).abs() <= 1e-6 * exact.abs().max(1.0), "{src}: fd {fd} exact {exact}");
    }

    #[test]
    fn print_then_parse_is_stable(src in expr_source(VARS2, 6)) {
        let ctx = red(2);
        let e1 = parse(&src, &ctx).unwrap();
        let printed = e1.display(&ctx).to_string();
        let e2 = parse(&printed, &ctx).unwrap();
        prop_assert_eq!(&e1, &e2, "{} printed as {}", src, printed);
        prop_assert_eq!(e2.display(&ctx).to_string(), printed);
    }

    #[test]
    fn derivative_is_linear(a in expr_source(VARS2, 4), b in expr_source(VARS2, 4), z in point(4), v in 0usize..4) {
        let ctx = red(2);
        let ea = parse(&a, &ctx).unwrap();
        let eb = parse(&b, &ctx).unwrap();
        let sum = parse(&format!("({a}) + ({b})"), &ctx).unwrap();
        let lhs = sum.diff(v).eval(&z).unwrap();
        let rhs = ea.diff(v).eval(&z).unwrap() + eb.diff(v).eval(&z).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
    }

    #[test]
    fn evaluation_is_deterministic(src in expr_source(VARS2, 6), z in point(4)) {
        let e = parse(&src, &red(2)).unwrap();
        let clone = e.clone();
        let (a, b) = (e.eval(&z).unwrap(), clone.eval(&z).unwrap());
        prop_assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn structure_matrix_is_skew(p in prop::collection::vec(-5.0f64..5.0, 1..4)) {
        let t = t_matrix(&p);
        prop_assert_eq!(t.transpose(), -&t);
        let th = t_hat(p.len());
        prop_assert_eq!(th.transpose(), -th);
    }

    #[test]
    fn poisson_is_antisymmetric(a in polynomial(VARS2), b in polynomial(VARS2), z in point(4)) {
        let (h1, h2) = (ham(&a, 2), ham(&b, 2));
        let z = PhasePoint::new(red(2), z).unwrap();
        let s = poisson(&h1, &h2, &z).unwrap() + poisson(&h2, &h1, &z).unwrap();
        prop_assert!(s.abs() <= 1e-12, "{s}");
        prop_assert!(poisson(&h1, &h1, &z).unwrap().abs() <= 1e-12);
    }

    #[test]
    fn char_field_matches_numeric_structure(src in expr_source(&["x1", "p1", "u"], 4), z in point(3)) {
        let ctx = VarContext::full(1);
        let h = Hamiltonian::parse(&src, ctx).unwrap();
        let v = h.value(&z).unwrap();
        prop_assume!(v.abs() < 1e2);
        let field = char_field(&h).eval(&z).unwrap();
        let step = 1e-6;
        let g: Vec<f64> = (0..3).map(|j| {
            let (mut a, mut b) = (z.clone(), z.clone());
            a[j] += step;
            b[j] -= step;
            (h.value(&a).unwrap() - h.value(&b).unwrap()) / (2.0 * step)
        }).collect();
        let numeric = t_matrix(&z[1..2]) * DVector::from_vec(g);
        prop_assert!(close(&field, numeric.as_slice(), 1e-6), "{src}: {field:?} vs {numeric}");
    }

    #[test]
    fn momentum_hamiltonian_field_is_the_lift(f1 in polynomial(&["x1", "x2"]), f2 in polynomial(&["x1", "x2"]), z in point(4)) {
        let f = VectorField::parse(VarContext::base(2), &[f1, f2]).unwrap();
        let via_h = char_field(&momentum_hamiltonian(&f).unwrap()).eval(&z).unwrap();
        let lift = cotangent_lift(&f).unwrap().eval(&z).unwrap();
        prop_assert!(close(&via_h, &lift, 1e-12));
    }

    #[test]
    fn lie_bracket_is_antisymmetric(a in polynomial(VARS2), b in polynomial(VARS2), z in point(4)) {
        let z1 = char_field(&ham(&a, 2)).into_field();
        let z2 = char_field(&ham(&b, 2)).into_field();
        let ab = lie_bracket(&z1, &z2).unwrap().eval(&z).unwrap();
        let ba = lie_bracket(&z2, &z1).unwrap().eval(&z).unwrap();
        for (x, y) in ab.iter().zip(&ba) {
            prop_assert!((x + y).abs() <= 1e-12 * x.abs().max(1.0));
        }
    }

    #[test]
    fn jacobi_identity(
        fs in prop::collection::vec(polynomial(&["x1", "x2"]), 6),
        z in point(2),
    ) {
        let b2 = VarContext::base(2);
        let f = |i: usize| VectorField::parse(b2, &fs[2 * i..2 * i + 2]).unwrap();
        let (a, b, c) = (f(0), f(1), f(2));
        let br = |x: &VectorField, y: &VectorField| lie_bracket(x, y).unwrap();
        let total: Vec<f64> = [
            br(&a, &br(&b, &c)),
            br(&b, &br(&c, &a)),
            br(&c, &br(&a, &b)),
        ]
        .iter()
        .map(|t| t.eval(&z).unwrap())
        .fold(vec![0.0; 2], |acc, v| acc.iter().zip(&v).map(|(s, w)| s + w).collect());
        let norm = total.iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assert!(norm <= 1e-8, "{norm}");
    }

    #[test]
    fn brackets_of_characteristic_fields_follow_poisson(a in polynomial(VARS2), b in polynomial(VARS2)) {
        let (h1, h2) = (ham(&a, 2), ham(&b, 2));
        let bracket = lie_bracket(&char_field(&h1), &char_field(&h2)).unwrap();
        let hb = poisson_bracket(&h1, &h2).unwrap();
        for z in charflow::sampling::ball(&[0.0; 4], 1.5, 20, 17) {
            let lhs = bracket.eval(&z).unwrap();
            let rhs = t_hat(2) * DVector::from_vec(hb.gradient_at(&z).unwrap());
            let err = lhs.iter().zip(rhs.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
            prop_assert!(err <= 1e-9, "{err}");
        }
    }

    #[test]
    fn lifted_bracket_momentum_is_linear_in_p(
        f1 in polynomial(&["x1", "x2"]), f2 in polynomial(&["x1", "x2"]),
        g1 in polynomial(&["x1", "x2"]), g2 in polynomial(&["x1", "x2"]),
        z in point(4),
    ) {
        let b2 = VarContext::base(2);
        let zf = cotangent_lift(&VectorField::parse(b2, &[f1, f2]).unwrap()).unwrap();
        let zg = cotangent_lift(&VectorField::parse(b2, &[g1, g2]).unwrap()).unwrap();
        let br = lie_bracket(&zf, &zg).unwrap();
        let doubled = [z[0], z[1], 2.0 * z[2], 2.0 * z[3]];
        let at_p = br.eval(&z).unwrap();
        let at_2p = br.eval(&doubled).unwrap();
        for k in 2..4 {
            prop_assert!((at_2p[k] - 2.0 * at_p[k]).abs() <= 1e-12 * at_2p[k].abs().max(1.0));
        }
        prop_assert!(close(&at_p[..2], &at_2p[..2], 0.0));
    }

    #[test]
    fn cauchy_checks_ignore_parameter_sign(
        x2 in polynomial(&["l1"]), u in polynomial(&["l1"]), p1 in polynomial(&["l1"]),
    ) {
        let flip = |s: &str| s.replace("l1", "(-l1)");
        let c = CauchyData::parse(&["l1".to_string(), x2.clone()], &[p1.clone(), "1".to_string()], &u, vec![1.0]).unwrap();
        let f = CauchyData::parse(&["-l1".to_string(), flip(&x2)], &[flip(&p1), "1".to_string()], &flip(&u), vec![1.0]).unwrap();
        let grid = c.grid(11).unwrap();
        let a = check_compatibility(&c, &grid, 1e-9).unwrap().max_residual;
        let b = check_compatibility(&f, &grid, 1e-9).unwrap().max_residual;
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
        let h = Hamiltonian::parse("p1^2 + p2^2 - 1", red(2)).unwrap();
        let ta = check_transversality(&c, &h, &grid, 1e-8).unwrap().min_abs_det;
        let tb = check_transversality(&f, &h, &grid, 1e-8).unwrap().min_abs_det;
        prop_assert!((ta - tb).abs() <= 1e-12 * ta.max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn flow_group_law_and_reversibility(
        s in -1.0f64..1.0, t in -1.0f64..1.0,
        y in point(2), k in 0.0f64..0.5,
    ) {
        // anharmonic oscillator
        let h = Hamiltonian::parse(&format!("p1^2/2 + x1^2/2 + {k:.4}*x1^4"), red(1)).unwrap();
        let z = char_field(&h).into_field();
        let cfg = IntegratorConfig::default();
        let ty = flow_coords(&z, t, &y, &cfg).unwrap();
        let sty = flow_coords(&z, s, &ty, &cfg).unwrap();
        let direct = flow_coords(&z, s + t, &y, &cfg).unwrap();
        prop_assert!(close(&sty, &direct, 1e-7), "{sty:?} vs {direct:?}");
        let back = flow_coords(&z, -t, &ty, &cfg).unwrap();
        prop_assert!(close(&back, &y, 1e-7), "{back:?} vs {y:?}");
    }
}
