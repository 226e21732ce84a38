use charflow::field::VectorField;
use charflow::lie::{check_lemma1, cotangent_lift, lie_bracket, momentum_hamiltonian};
use charflow::sampling::ball;
use charflow::space::VarContext;

fn main() {
    let base = VarContext::base(2);
    let rotation = VectorField::parse(base, &["-x2", "x1"]).unwrap();
    let shear = VectorField::parse(base, &["x2", "0"]).unwrap();

    let lifted = cotangent_lift(&rotation).unwrap();
    println!("lift of rotation: {:?}", lifted.to_strings());
    println!("as a Hamiltonian: {}", momentum_hamiltonian(&rotation).unwrap().source());

    let bracket = lie_bracket(&rotation, &shear).unwrap();
    println!("[rotation, shear] = {:?}", bracket.to_strings());

    let euler = VectorField::parse(base, &["x1", "x2"]).unwrap();
    let diagonal = [
        VectorField::parse(base, &["x1", "0"]).unwrap(),
        VectorField::parse(base, &["0", "x2"]).unwrap(),
    ];
    let grid = ball(&[0.0; 4], 1.0, 50, 7);
    let r = check_lemma1(&diagonal, &euler, &grid, 1e-12).unwrap();
    println!(
        "diagonal family: commute {:.1e}, closure {:.1e}, lifted brackets {:.1e}, pass = {}",
        r.commute_residual, r.closure.max_residual, r.lift_residual, r.pass
    );
}
