use charflow::charfield::{char_field, Hamiltonian};
use charflow::lie::{check_closure, ClosureMode};
use charflow::sampling::ball;
use charflow::space::VarContext;

fn main() {
    let ctx = VarContext::reduced(3);
    let fields: Vec<_> = ["x2*p3 - x3*p2", "x3*p1 - x1*p3", "x1*p2 - x2*p1"]
        .iter()
        .map(|src| char_field(&Hamiltonian::parse(src, ctx).unwrap()).into_field())
        .collect();
    let grid = ball(&[0.0; 6], 1.0, 50, 11);

    let r = check_closure(&fields, ClosureMode::Constants, &grid, 1e-8).unwrap();
    println!("closure residual {:.2e} (pass = {})", r.max_residual, r.pass);
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        let alpha: Vec<f64> = (0..3).map(|k| r.alpha(i, j, k).unwrap()).collect();
        println!("[Z{}, Z{}] = {:+.3} Z1 {:+.3} Z2 {:+.3} Z3", i + 1, j + 1, alpha[0], alpha[1], alpha[2]);
    }

    let mut broken = fields.clone();
    let mut third = broken[2].to_strings();
    third[5] = format!("{} + x1^2", third[5]);
    broken[2] = charflow::field::VectorField::parse(ctx, &third).unwrap();
    let r = check_closure(&broken, ClosureMode::Constants, &grid, 1e-8).unwrap();
    println!("perturbed third generator: residual {:.2e} (pass = {})", r.max_residual, r.pass);
}
