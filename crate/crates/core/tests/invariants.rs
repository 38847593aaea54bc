use std::sync::Arc;

use hallmhd::assembly::{Assembler, TrilinearKind};
use hallmhd::mms::fit_order;
use hallmhd::quadrature::gauss_rule;
use hallmhd::{BoxDomain, DeRhamComplex, DiscreteField, HexMesh, MappingSpec, SpaceTag, TimeLabel};
use proptest::prelude::*;

fn assembler(k: usize, n: usize, c: f64) -> Assembler<f64> {
    let mesh = HexMesh::build(k, BoxDomain::unit(), MappingSpec::crazy(c)).unwrap();
    Assembler::new(Arc::new(DeRhamComplex::build(mesh, n).unwrap())).unwrap()
}

fn max_abs(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |m, x| m.max(x.abs()))
}

proptest! {
    #[test]
    fn boundary_stays_on_boundary(c in 0.0..0.3f64, axis in 0usize..3, side in 0usize..2,
                                  a in 0.0..1.0f64, b in 0.0..1.0f64) {
        let map = MappingSpec::crazy(c);
        let mut r = [a, b, a * b];
        r[axis] = side as f64;
        let x = map.map_reference(&r);
        prop_assert!((x[axis] - side as f64).abs() <= 1e-14);
        for q in x {
            prop_assert!((-1e-14..=1.0 + 1e-14).contains(&q));
        }
    }

    #[test]
    fn gauss_is_exact_to_degree_2n_minus_1(n in 1usize..14, frac in 0.0..1.0f64) {
        let rule = gauss_rule::<f64>(n);
        let d = ((2 * n - 1) as f64 * frac).round() as i32;
        let got = rule.integrate(|x| x.powi(d));
        let exact = if d % 2 == 0 { 2.0 / (d + 1) as f64 } else { 0.0 };
        prop_assert!((got - exact).abs() <= 1e-13 * exact.abs().max(1.0), "n={n} d={d}: {got} vs {exact}");
    }

    #[test]
    fn fitted_order_of_a_power_law(p in 0.5..4.0f64, scale in 1e-3..1e3f64) {
        let x = [0.1, 0.08, 0.05, 0.03];
        let e: Vec<f64> = x.iter().map(|h: &f64| scale * h.powf(p)).collect();
        prop_assert!((fit_order(&x, &e) - p).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn vorticity_operator_is_skew_for_any_frozen_field(c in 0.0..0.2f64, seed in proptest::collection::vec(-1.0..1.0f64, 64)) {
        let asm = assembler(2, 1, c);
        let dim = asm.complex().dim(SpaceTag::C);
        let coeffs: Vec<f64> = (0..dim).map(|i| seed[i % seed.len()] * (1.0 + i as f64).sin()).collect();
        let omega = DiscreteField::new(SpaceTag::C, coeffs, TimeLabel::integer(0));
        let a = asm.trilinear_matrix(TrilinearKind::AOmega, &omega).unwrap().to_dense();
        let scale = max_abs(a.iter().flatten().copied());
        for i in 0..a.len() {
            for j in 0..a.len() {
                prop_assert!((a[i][j] + a[j][i]).abs() <= 1e-13 * scale.max(1.0));
            }
        }
    }

    #[test]
    fn divergence_of_curl_of_c0_is_exactly_zero(h in proptest::collection::vec(-50i32..50, 1..200)) {
        let asm = assembler(2, 2, 0.1);
        let (_, _, d, c0) = asm.complex().incidence_matrices();
        let x: Vec<i32> = (0..c0.ncols()).map(|i| h[i % h.len()]).collect();
        prop_assert!(d.matvec(&c0.matvec(&x)).iter().all(|&v| v == 0));
    }
}

#[test]
fn single_precision_aliases_assemble() {
    let mesh = hallmhd::Mesh32::build(2, BoxDomain::unit(), MappingSpec::affine()).unwrap();
    let asm = hallmhd::Assembler32::new(Arc::new(hallmhd::Complex32::build(mesh, 1).unwrap())).unwrap();
    let m = asm.mass_matrix(SpaceTag::S).to_dense();
    // the scalar mass of the constant 1 is the volume of the unit cube
    let ones = asm.interpolate(SpaceTag::S, &|_: &[f32; 3], _| [1.0, 0.0, 0.0], 0.0);
    let total: f32 = (0..m.len()).map(|i| (0..m.len()).map(|j| ones.coeffs[i] * m[i][j] * ones.coeffs[j]).sum::<f32>()).sum();
    assert!((total - 1.0).abs() < 1e-5, "{total}");
}
