use charflow::expr::parse;
use charflow::space::VarContext;

fn main() {
    let ctx = VarContext::reduced(2);
    let e = parse("p1*x1 + sin(x1) - x2^2/2", &ctx).expect("valid expression");
    println!("H = {}", e.display(&ctx));

    let z = [0.3, -1.0, 2.0, 0.5];
    println!("H(z) = {}", e.eval(&z).unwrap());
    for (i, name) in ctx.var_names().iter().enumerate() {
        let d = e.diff(i);
        println!("∂H/∂{name} = {:<24} = {}", d.display(&ctx).to_string(), d.eval(&z).unwrap());
    }

    match parse("p1 * (x1 + ", &ctx) {
        Ok(_) => unreachable!(),
        Err(err) => println!("error: {err}"),
    }
}
