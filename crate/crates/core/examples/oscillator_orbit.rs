use charflow::charfield::{char_field, Hamiltonian};
use charflow::flow::{IntegratorConfig, Orbit};
use charflow::space::{PhasePoint, VarContext};

fn main() {
    let ctx = VarContext::reduced(2);
    let h0 = Hamiltonian::parse("(p1^2 + p2^2 + x1^2 + x2^2)/2", ctx).unwrap();
    let angular = Hamiltonian::parse("x1*p2 - x2*p1", ctx).unwrap();
    let z0 = PhasePoint::reduced(&[1.0, 0.0], &[0.0, 0.5]).unwrap();
    let level = h0.value_at(&z0).unwrap();

    let orbit = Orbit::new(
        vec![char_field(&h0).into_field(), char_field(&angular).into_field()],
        z0,
        vec![0.5, 0.5],
        IntegratorConfig::rk4(1e-3),
    )
    .unwrap();

    println!("{:>6} {:>6}  {:>9} {:>9} {:>9} {:>9}  drift", "t1", "t2", "x1", "x2", "p1", "p2");
    for row in orbit.grid(5).unwrap() {
        let z = row.point.unwrap();
        let c = z.coords();
        println!(
            "{:>6.2} {:>6.2}  {:>9.5} {:>9.5} {:>9.5} {:>9.5}  {:.1e}",
            row.lambda[0],
            row.lambda[1],
            c[0],
            c[1],
            c[2],
            c[3],
            h0.value_at(&z).unwrap() - level
        );
    }
}
