use charflow::charfield::Hamiltonian;
use charflow::space::{PhasePoint, VarContext};
use charflow::stationary::{check_compatibility, check_level, check_transversality, CauchyData};

fn report(label: &str, data: &CauchyData) {
    let h0 = Hamiltonian::parse("p1^2 + p2^2 - 1", VarContext::reduced(2)).unwrap();
    let z0 = PhasePoint::reduced(&[0.0, 0.0], &[0.0, 1.0]).unwrap();
    let grid = data.grid(21).unwrap();
    let compat = check_compatibility(data, &grid, 1e-9).unwrap();
    let level = check_level(data, &h0, &z0, &grid, 1e-9).unwrap();
    let trans = check_transversality(data, &h0, &grid, 1e-8).unwrap();
    println!(
        "{label:<14} compatibility {:.1e}  level {:.1e}  min |det| {:.3}  pass = {}",
        compat.max_residual,
        level.max_residual,
        trans.min_abs_det,
        compat.pass && level.pass && trans.pass
    );
}

fn main() {
    // a unit-speed front leaving the x1 axis
    let line = CauchyData::parse(&["l1", "0"], &["0", "1"], "0", vec![1.0]).unwrap();
    report("x1 axis", &line);

    let tilted = CauchyData::parse(&["l1", "0"], &["0", "1"], "l1", vec![1.0]).unwrap();
    report("u0 = l1", &tilted);

    let tangent = CauchyData::parse(&["0", "l1"], &["0", "1"], "l1", vec![1.0]).unwrap();
    report("x2 axis", &tangent);
}
