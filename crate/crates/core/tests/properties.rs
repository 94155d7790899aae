use cnsdisc_core::estimates::potential_density;
use cnsdisc_core::io::Snapshot;
use cnsdisc_core::params::{q0, FluidParams};
use cnsdisc_core::zlotnik::{brute_force_ode, find_zeta_bar, zlotnik_bound, Forcing, GFunction, ZlotnikInstance};
use cnsdisc_core::{PolarGrid, ScalarField, VectorField, Wall};
use proptest::prelude::*;

fn grid() -> impl Strategy<Value = PolarGrid> {
    (2usize..10, 4usize..12).prop_map(|(nr, nt)| PolarGrid::new(nr, 2 * nt, 1.0).unwrap())
}

fn field(grid: &PolarGrid, a: f64, b: f64, c: f64) -> ScalarField {
    ScalarField::from_fn(grid, |x, y| a + b * x * y + c * (2.0 * x - y).sin())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn operators_are_linear(g in grid(), a in -2.0..2.0f64, b in -2.0..2.0f64, s in -3.0..3.0f64) {
        let f = field(&g, a, b, 1.0);
        let h = field(&g, b, 0.5, a);
        let comb = &f.scale(s) + &h;
        for wall in [Wall::Extrapolate, Wall::Zero] {
            let lhs = g.laplacian_with(&comb, wall).unwrap();
            let rhs = &g.laplacian_with(&f, wall).unwrap().scale(s) + &g.laplacian_with(&h, wall).unwrap();
            prop_assert!((&lhs - &rhs).max_abs() <= 1e-9 * (1.0 + rhs.max_abs()));
        }
        let lhs = g.integrate(&comb).unwrap();
        let rhs = s * g.integrate(&f).unwrap() + g.integrate(&h).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
    }

    #[test]
    fn lq_norm_is_homogeneous(g in grid(), c in -5.0..5.0f64, q in 1.0..8.0f64) {
        let f = field(&g, 0.3, 1.0, -0.7);
        let lhs = g.lq_norm(&f.scale(c), q).unwrap();
        let rhs = c.abs() * g.lq_norm(&f, q).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs));
    }

    #[test]
    fn integral_of_constant_is_area(g in grid(), c in -4.0..4.0f64) {
        let v = g.integrate(&ScalarField::constant(&g, c)).unwrap();
        prop_assert!((v - c * std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn snapshot_round_trip(g in grid(), vals in proptest::collection::vec(-1e6..1e6f64, 2 * 200)) {
        let n = g.len();
        let x = ScalarField::from_values(&g, vals[..n].to_vec()).unwrap();
        let y = ScalarField::from_values(&g, vals[n..2 * n].to_vec()).unwrap();
        let v = VectorField::new(x.clone(), y).unwrap();
        let back = Snapshot::from_bytes(&Snapshot::vector(&v).to_bytes()).unwrap().into_vector(&g).unwrap();
        prop_assert_eq!(back, v);
        let back = Snapshot::from_bytes(&Snapshot::scalar(&x).to_bytes()).unwrap().into_scalar(&g).unwrap();
        prop_assert_eq!(back, x);
    }

    #[test]
    fn truncated_snapshots_are_rejected(g in grid(), cut in 1usize..40) {
        let bytes = Snapshot::scalar(&ScalarField::constant(&g, 1.0)).to_bytes();
        let cut = cut.min(bytes.len());
        prop_assert!(Snapshot::from_bytes(&bytes[..bytes.len() - cut]).is_err());
    }

    #[test]
    fn potential_density_is_nonnegative(rho in 0.0..10.0f64, gamma in 1.01..3.0f64) {
        let f = FluidParams { gamma, ..FluidParams::default() };
        prop_assert!(potential_density(rho, &f) >= -1e-14);
    }

    #[test]
    fn q0_exceeds_twelve(gamma in 1.01..10.0f64) {
        prop_assert!(q0(gamma) > 12.0);
    }

    #[test]
    fn bound_shifts_exactly_with_n0(y0 in -5.0..5.0f64, zeta in -5.0..5.0f64, n0 in 0.0..3.0f64, d in 0.0..3.0f64) {
        let a = zlotnik_bound(y0, zeta, n0);
        let b = zlotnik_bound(y0, zeta, n0 + d);
        prop_assert!((b - a - d).abs() <= 1e-12 * (1.0 + b.abs()));
        prop_assert!(a >= y0.max(zeta) - 1e-15);
    }

    #[test]
    fn affine_trajectories_stay_below_the_bound(
        c0 in -1.0..2.0f64,
        c1 in 0.2..3.0f64,
        y0 in -2.0..3.0f64,
        slope in 0.0..1.5f64,
        jump in 0.0..1.0f64,
        at in 0.1..0.9f64,
    ) {
        let b = Forcing { knots: vec![0.0, 2.0], slopes: vec![slope], jumps: vec![(2.0 * at, jump)] };
        let inst = ZlotnikInstance { g: GFunction::Affine { c0, c1 }, y0, b, slack: 0.0 };
        let s = brute_force_ode(&inst, 2e-2).unwrap();
        let zeta = find_zeta_bar(|y| c0 - c1 * y, inst.b.n1(), -10.0, 40.0, 40_000).unwrap();
        prop_assert!(s.max() <= zlotnik_bound(y0, zeta, inst.b.n0()) + 1e-6);
    }
}
