use charflow::charfield::{char_field, poisson, poisson_bracket, Hamiltonian};
use charflow::space::{PhasePoint, VarContext};

fn main() {
    let ctx = VarContext::reduced(2);
    let energy = Hamiltonian::parse("(p1^2 + p2^2 + x1^2 + x2^2)/2", ctx).unwrap();
    let angular = Hamiltonian::parse("x1*p2 - x2*p1", ctx).unwrap();
    let push = Hamiltonian::parse("p1", ctx).unwrap();

    let z = PhasePoint::reduced(&[1.0, 0.5], &[-0.2, 0.8]).unwrap();
    println!("field of H at z: {:?}", char_field(&energy).eval(z.coords()).unwrap());

    for (name, h) in [("angular momentum", &angular), ("p1", &push)] {
        let b = poisson_bracket(&energy, h).unwrap();
        println!(
            "{{H, {name}}} = {}   value at z: {:.3e}",
            b.source(),
            poisson(&energy, h, &z).unwrap()
        );
    }

    // the full case carries u and the U = <p, ∂pH> component
    let full = Hamiltonian::parse("p1^2/2 + u*x1", VarContext::full(1)).unwrap();
    let z = [1.0, 2.0, 3.0];
    println!("full-case field at {z:?}: {:?}", char_field(&full).eval(&z).unwrap());
}
