use eds_core::darboux::{build_projection, InvariantSet};
use eds_core::decomposable::DecomposableSystem;
use eds_core::geometry::Chart;
use eds_core::solver::{integrate_surface, residual_check, restrict_to_lift, tangency_check, Curve, Tolerances};

#[test]
fn liouville_closed_form() {
    let chart = Chart::new(["x", "y", "z", "p", "q", "r", "t"]).unwrap();
    let sys = DecomposableSystem::parse(
        &chart,
        &["d/dx + p*d/dz + r*d/dp + exp(z)*d/dq + q*exp(z)*d/dt", "d/dr"],
        &["d/dy + q*d/dz + exp(z)*d/dp + t*d/dq + p*exp(z)*d/dr", "d/dt"],
    )
    .unwrap();
    let inv = InvariantSet::parse(&chart, &["y", "t - q^2/2"], &["x", "r - p^2/2"]).unwrap();
    let proj = build_projection(&sys, &inv).unwrap();
    let dirs = restrict_to_lift(
        &proj,
        Curve::parse("u", "u, 0", (0.5, 1.5)).unwrap(),
        Curve::parse("v", "v, 0", (0.5, 1.5)).unwrap(),
    )
    .unwrap();
    let m0 = vec![0.5, 0.5, 2f64.ln(), -2.0, -2.0, 2.0, 2.0];
    let nodes: Vec<f64> = (0..21).map(|i| 0.5 + i as f64 * 0.05).collect();
    let s = integrate_surface(&dirs, &m0, (0.5, 0.5), &nodes, &nodes, Tolerances::default()).unwrap();
    let mut worst = 0.0_f64;
    for (i, &x) in nodes.iter().enumerate() {
        for (j, &y) in nodes.iter().enumerate() {
            let z = (2.0 / (x + y).powi(2)).ln();
            worst = worst.max((s.node(i, j)[2] - z).abs());
        }
    }
    println!("max dz {worst:e} defect {:e} proj {:e}", s.defect, s.projection_error);
    let r = residual_check(&s, "p_y - exp(z)", ["x", "y"]).unwrap();
    let fd = residual_check(&s, "z_xy - exp(z)", ["x", "y"]).unwrap();
    println!("residual {:e} fd {:e}", r.max, fd.max);
    let t = tangency_check(&s, sys.f(), sys.g(), 1e-5).unwrap();
    println!("tangency {} of {}", t.failures.len(), t.checked);
    assert!(t.ok());
    assert!(worst < 1e-6);
    assert!(r.max < 1e-5);
}
