use std::collections::BTreeMap;
use std::sync::Arc;

use eds_core::darboux::{
    build_projection, derived_tangential_frame, fingerprint_numeric, lift_frame, InvariantSet, Side,
};
use eds_core::decomposable::DecomposableSystem;
use eds_core::expr::{parse_expr, Certification, NormalForm, Symbol, ZeroVerdict};
use eds_core::geometry::{Chart, Projection, Submersion, VectorField};
use eds_core::solver::{default_initial_point, integrate_surface, restrict_to_lift, Curve, Tolerances};
use proptest::prelude::*;

const NAMES: [&str; 4] = ["a", "b", "c", "d"];

/// Monomials of total degree at most 2: (coefficient, exponents).
fn poly(dim: usize) -> impl Strategy<Value = Vec<(i64, Vec<u32>)>> {
    prop::collection::vec(
        (-3i64..=3, prop::collection::vec(0u32..=2, dim)).prop_filter("degree <= 2", |(_, e)| e.iter().sum::<u32>() <= 2),
        0..4,
    )
}

fn build(terms: &[(i64, Vec<u32>)], names: &[&str]) -> NormalForm {
    let mut out = NormalForm::zero();
    for (c, exps) in terms {
        let mut m = NormalForm::int(*c);
        for (name, &e) in names.iter().zip(exps) {
            m = m.mul(&NormalForm::symbol(name).pow(e as i64).unwrap());
        }
        out = out.add(&m);
    }
    out
}

fn field(chart: &Arc<Chart>, polys: &[Vec<(i64, Vec<u32>)>]) -> VectorField {
    let names: Vec<&str> = chart.coords().iter().map(String::as_str).collect();
    VectorField::new(chart, polys.iter().map(|p| build(p, &names)).collect()).unwrap()
}

fn fields3(dim: usize) -> impl Strategy<Value = [Polys; 3]> {
    let one = move || prop::collection::vec(poly(dim), dim);
    (one(), one(), one()).prop_map(|(x, y, z)| [x, y, z])
}

type Polys = Vec<Vec<(i64, Vec<u32>)>>;

fn triple() -> impl Strategy<Value = (usize, [Polys; 3])> {
    (1usize..=4).prop_flat_map(|d| (Just(d), fields3(d)))
}

fn chart(dim: usize) -> Arc<Chart> {
    Chart::new(&NAMES[..dim]).unwrap()
}

/// Scalar expressions mixing polynomials with one transcendental factor.
fn scalar() -> impl Strategy<Value = NormalForm> {
    (poly(2), poly(2), 0usize..3).prop_map(|(p, q, f)| {
        let p = build(&p, &["a", "b"]);
        let q = build(&q, &["a", "b"]);
        let t = match f {
            0 => NormalForm::one(),
            1 => NormalForm::apply(eds_core::expr::Func::Exp, NormalForm::symbol("a")).unwrap(),
            _ => NormalForm::apply(eds_core::expr::Func::Sin, NormalForm::symbol("b")).unwrap(),
        };
        p.add(&q.mul(&t))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn bracket_is_antisymmetric((dim, [x, y, _]) in triple()) {
        let c = chart(dim);
        let (x, y) = (field(&c, &x), field(&c, &y));
        let sum = x.bracket(&y).unwrap().add(&y.bracket(&x).unwrap()).unwrap();
        prop_assert!(sum.is_literal_zero());
    }

    #[test]
    fn jacobi_identity((dim, [x, y, z]) in triple()) {
        let c = chart(dim);
        let (x, y, z) = (field(&c, &x), field(&c, &y), field(&c, &z));
        let cyc = x.bracket(&y).unwrap().bracket(&z).unwrap()
            .add(&y.bracket(&z).unwrap().bracket(&x).unwrap()).unwrap()
            .add(&z.bracket(&x).unwrap().bracket(&y).unwrap()).unwrap();
        prop_assert!(cyc.zero_verdict().is_zero(), "{}", cyc);
    }

    #[test]
    fn derivative_is_linear(f in scalar(), g in scalar(), k in -5i64..=5) {
        let lhs = f.add(&g.mul(&NormalForm::int(k))).derivative("a");
        let rhs = f.derivative("a").add(&g.derivative("a").mul(&NormalForm::int(k)));
        prop_assert_eq!(lhs.sub(&rhs), NormalForm::zero());
    }

    #[test]
    fn leibniz_rule(f in scalar(), g in scalar()) {
        let lhs = f.mul(&g).derivative("b");
        let rhs = f.derivative("b").mul(&g).add(&f.mul(&g.derivative("b")));
        prop_assert_eq!(lhs.sub(&rhs), NormalForm::zero());
    }

    #[test]
    fn printing_round_trips(f in scalar()) {
        let table = eds_core::expr::SymbolTable::coordinates(["a", "b"]);
        let back = parse_expr(&f.to_string(), &table).unwrap().to_normal().unwrap();
        prop_assert_eq!(back, f);
    }
}

/// `π(a, b, c, d) = (a, b + a c)`; a field with `dπ(X) = (P, Q)∘π` built by
/// choosing the `c` and `d` components freely.
fn projectable(
    source: &Arc<Chart>,
    p: &[(i64, Vec<u32>)],
    q: &[(i64, Vec<u32>)],
    r: &[(i64, Vec<u32>)],
    s: &[(i64, Vec<u32>)],
) -> (VectorField, [NormalForm; 2]) {
    let w = parse_expr("b + a*c", source.table()).unwrap().to_normal().unwrap();
    let mut sub: BTreeMap<Symbol, NormalForm> = BTreeMap::new();
    sub.insert("u".into(), NormalForm::symbol("a"));
    sub.insert("w".into(), w);
    let pb = build(p, &["u", "w"]);
    let qb = build(q, &["u", "w"]);
    let xa = pb.substitute(&sub).unwrap();
    let xc = build(r, &NAMES);
    let a = NormalForm::symbol("a");
    let c = NormalForm::symbol("c");
    let xb = qb.substitute(&sub).unwrap().sub(&c.mul(&xa)).sub(&a.mul(&xc));
    let xd = build(s, &NAMES);
    (VectorField::new(source, vec![xa, xb, xc, xd]).unwrap(), [pb, qb])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn projection_is_a_homomorphism(
        p1 in poly(2), q1 in poly(2), r1 in poly(4), s1 in poly(4),
        p2 in poly(2), q2 in poly(2), r2 in poly(4), s2 in poly(4),
    ) {
        let source = chart(4);
        let target = Chart::new(["u", "w"]).unwrap();
        let w = parse_expr("b + a*c", source.table()).unwrap().to_normal().unwrap();
        let pi = Submersion::new(&source, &target, vec![NormalForm::symbol("a"), w]).unwrap();
        let (x, xb) = projectable(&source, &p1, &q1, &r1, &s1);
        let (y, yb) = projectable(&source, &p2, &q2, &r2, &s2);
        let xbar = VectorField::new(&target, xb.to_vec()).unwrap();
        let ybar = VectorField::new(&target, yb.to_vec()).unwrap();
        let Projection::Projected(px) = pi.project_field(&x).unwrap() else { panic!("X not projectable") };
        prop_assert!(px.sub(&xbar).unwrap().zero_verdict().is_zero());
        let b = x.bracket(&y).unwrap();
        let Projection::Projected(pb) = pi.project_field(&b).unwrap() else { panic!("[X,Y] not projectable") };
        let want = xbar.bracket(&ybar).unwrap();
        prop_assert!(pb.sub(&want).unwrap().zero_verdict().is_zero());
    }
}

fn wave() -> (DecomposableSystem, InvariantSet) {
    let chart = Chart::new(["x", "y", "z", "p", "q"]).unwrap();
    let sys = DecomposableSystem::parse(&chart, &["d/dx + p*d/dz", "d/dp"], &["d/dy + q*d/dz", "d/dq"]).unwrap();
    let inv = InvariantSet::parse(&chart, &["y", "q"], &["x", "p"]).unwrap();
    (sys, inv)
}

fn liouville() -> (DecomposableSystem, InvariantSet) {
    let chart = Chart::new(["x", "y", "z", "p", "q", "r", "t"]).unwrap();
    let sys = DecomposableSystem::parse(
        &chart,
        &["d/dx + p*d/dz + r*d/dp + exp(z)*d/dq + q*exp(z)*d/dt", "d/dr"],
        &["d/dy + q*d/dz + exp(z)*d/dp + t*d/dq + p*exp(z)*d/dr", "d/dt"],
    )
    .unwrap();
    let inv = InvariantSet::parse(&chart, &["y", "t - q^2/2"], &["x", "r - p^2/2"]).unwrap();
    (sys, inv)
}

#[test]
fn fingerprints_agree_across_fibers() {
    for (sys, inv) in [wave(), liouville()] {
        let proj = build_projection(&sys, &inv).unwrap();
        let lift = lift_frame(&proj, None, None).unwrap();
        for side in [Side::F, Side::G] {
            let pres = derived_tangential_frame(&proj, &lift, side).unwrap();
            let points = sys.chart().sample_points_n(&[], 4).unwrap();
            let images: Vec<Vec<f64>> = points.iter().map(|p| proj.submersion().map_point(p).unwrap()).collect();
            for i in 0..4 {
                for j in i + 1..4 {
                    let gap = images[i].iter().zip(&images[j]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                    assert!(gap > 1e-6, "sample fibers coincide");
                }
            }
            let fps: Vec<_> = points
                .iter()
                .map(|p| fingerprint_numeric(&pres.coeffs_at(p).unwrap(), 1e-9).unwrap())
                .collect();
            assert!(fps.iter().all(|f| *f == fps[0]), "{side}: {fps:?}");
        }
    }
}

#[test]
fn path_independence_within_ten_tolerances() {
    let tol = Tolerances::default();
    let cases = [
        (wave(), "u, u^2", "v, sin(v)", (0.0, 1.0)),
        (liouville(), "u, u", "v, v", (0.5, 1.5)),
    ];
    for ((sys, inv), g1, g2, range) in cases {
        let proj = build_projection(&sys, &inv).unwrap();
        let dirs = restrict_to_lift(
            &proj,
            Curve::parse("u", g1, range).unwrap(),
            Curve::parse("v", g2, range).unwrap(),
        )
        .unwrap();
        let m0 = default_initial_point(&proj, &dirs, range.0, range.0).unwrap();
        let nodes: Vec<f64> = (0..11).map(|i| range.0 + (range.1 - range.0) * i as f64 / 10.0).collect();
        let s = integrate_surface(&dirs, &m0, (range.0, range.0), &nodes, &nodes, tol).unwrap();
        assert!(s.consistent(10.0), "defect {} ({}), projection {} ({})", s.defect, s.defect_ratio, s.projection_error, s.projection_ratio);
    }
}

#[test]
fn prolonged_wave_is_decomposable() {
    let (sys, _) = wave();
    let p = sys.prolong().unwrap();
    let r = p.check().unwrap();
    assert!(r.ok(), "{:?}", r.failures);
    assert_eq!((r.class.s, r.class.k, r.class.l), (3, 2, 2));
}

#[test]
fn transcendental_jacobi_is_symbolic() {
    let c = chart(2);
    let x = VectorField::parse(&c, "exp(a)*d/da + b*d/db").unwrap();
    let y = VectorField::parse(&c, "sin(b)*d/da").unwrap();
    let z = VectorField::parse(&c, "a*b*d/db").unwrap();
    let cyc = x.bracket(&y).unwrap().bracket(&z).unwrap()
        .add(&y.bracket(&z).unwrap().bracket(&x).unwrap()).unwrap()
        .add(&z.bracket(&x).unwrap().bracket(&y).unwrap()).unwrap();
    assert_eq!(cyc.zero_verdict(), ZeroVerdict::Zero(Certification::Symbolic));
}
