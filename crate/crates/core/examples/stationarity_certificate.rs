use std::path::Path;

use charflow::gradsys::{certify_stationarity, representation, CertifyOptions};
use charflow::Problem;

fn main() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("problems/oscillator.toml");
    let problem = Problem::load(&path).unwrap();
    let orbit = problem.orbit().unwrap();

    let rep = representation(&orbit, &[0.2, -0.3]).unwrap();
    println!("A at λ = (0.2, -0.3):{:.6}", rep.a);
    println!("σ_min(A) = {:.4}, max defect = {:.1e}", rep.sigma_min_a, rep.max_defect());

    let opts = CertifyOptions {
        points_per_axis: 11,
        ..CertifyOptions::default()
    };
    let cert = certify_stationarity(&orbit, &problem.h0, &opts).unwrap();
    println!("certificate over {} points: pass = {}", cert.points, cert.pass);
    println!("  max drift           {:.2e}", cert.max_drift);
    println!("  max ⟨Jᵀ∇H0, q_i⟩    {:.2e}", cert.max_directional);
    println!("  |A(0) - I|          {:.2e}", cert.identity_error.unwrap_or(f64::NAN));
    println!("  min σ(A)            {:.3}", cert.min_sigma_a);
}
