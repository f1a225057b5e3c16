use proptest::prelude::*;

use fraclevel::gamma::rgamma;
use fraclevel::grid_calculus::GridFn;
use fraclevel::inverse_solver::{solve, ConvolutionMethod, FunctionData, InverseProblemSpec};
use fraclevel::level_derivative::{equivalence_discrepancy, lfd_composed, LevelParams};
use fraclevel::mittag_leffler::ml_eval;
use fraclevel::power_calculus::{rl_integral, Monomial, MonomialSum};
use fraclevel::spectral::{project, reconstruct, EigenIndex, SpectralCoeffs};

fn monomials(lo: f64) -> impl Strategy<Value = MonomialSum> {
    prop::collection::vec((-3.0f64..3.0, lo..4.0), 1..5)
        .prop_map(|v| MonomialSum::new(v.into_iter().map(|(c, a)| Monomial::new(c, a))).unwrap())
}

fn level_params(n: usize) -> impl Strategy<Value = LevelParams> {
    (0.05f64..0.98, prop::collection::vec(0.0f64..1.0, n)).prop_filter_map(
        "admissible",
        |(rho, nus)| {
            LevelParams::new(rho, &nus)
                .ok()
                .filter(|p| p.xis()[0] > 0.02)
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn integral_semigroup(f in monomials(-0.9), a in 0.05f64..2.0, b in 0.05f64..2.0) {
        let lhs = rl_integral(&rl_integral(&f, a).unwrap(), b).unwrap();
        let rhs = rl_integral(&f, a + b).unwrap();
        prop_assert!(lhs.max_discrepancy(&rhs) < 1e-12);
    }

    #[test]
    fn monomial_text_round_trips(f in monomials(-0.9)) {
        let back: MonomialSum = f.to_string().parse().unwrap();
        prop_assert_eq!(back, f);
    }

    #[test]
    fn equivalence_n2(
        (p, f) in level_params(2).prop_flat_map(|p| {
            let lo = p.correction_exponent(1) + 1e-3;
            (Just(p), monomials(lo))
        })
    ) {
        prop_assert!(equivalence_discrepancy(&f, &p).unwrap() < 1e-11);
    }

    #[test]
    fn equivalence_n3_on_polynomials(p in level_params(3), c in -2.0f64..2.0) {
        let f = MonomialSum::new([Monomial::new(c, 2.0), Monomial::new(1.0, 3.5)]).unwrap();
        prop_assert!(equivalence_discrepancy(&f, &p).unwrap() < 1e-11);
    }

    #[test]
    fn first_kernel_element_is_annihilated(p in level_params(2)) {
        let f = MonomialSum::monomial(1.0, p.xis()[0] - 1.0).unwrap();
        prop_assert!(lfd_composed(&f, &p).unwrap().is_zero());
    }

    #[test]
    fn ml_recurrence(rho in 0.1f64..2.0, nu in 0.1f64..3.0, z in -20.0f64..4.0) {
        // E_ρ(z) ~ exp(z^{1/ρ}) leaves f64 range for large positive z
        prop_assume!(z <= 0.0 || z.powf(1.0 / rho) < 500.0);
        let lhs = ml_eval(rho, nu, z).unwrap();
        let rhs = z * ml_eval(rho, rho + nu, z).unwrap() + rgamma(nu);
        prop_assert!((lhs - rhs).abs() <= 1e-9 * lhs.abs().max(1.0), "{lhs} {rhs}");
    }

    #[test]
    fn ml_completely_monotone_on_negative_axis(rho in 0.1f64..1.0, x in 0.0f64..50.0) {
        // E_ρ(-x) decreases from 1 and stays positive for ρ ≤ 1
        let a = ml_eval(rho, 1.0, -x).unwrap();
        let b = ml_eval(rho, 1.0, -x - 0.5).unwrap();
        prop_assert!(a > 0.0 && b <= a + 1e-15);
    }

    #[test]
    fn spectral_round_trip(c in prop::collection::vec(-1.0f64..1.0, 7)) {
        let coeffs = SpectralCoeffs::new(c[0], c[1..4].to_vec(), c[4..7].to_vec()).unwrap();
        let back = project(|x| reconstruct(&coeffs, x).unwrap(), 3).unwrap();
        prop_assert!(back.max_abs_diff(&coeffs) < 1e-9);
    }

    #[test]
    fn grid_csv_round_trip(v in prop::collection::vec(-1e3f64..1e3, 2..40), t_max in 0.1f64..10.0) {
        let g = GridFn::new(v, t_max).unwrap();
        let back = GridFn::from_csv(&g.to_csv()).unwrap();
        prop_assert_eq!(back.samples(), g.samples());
    }
}

fn coeffs(v: &[f64]) -> SpectralCoeffs {
    SpectralCoeffs::new(v[0], v[1..3].to_vec(), v[3..5].to_vec()).unwrap()
}

fn solve_with(
    p: &LevelParams,
    phi: &SpectralCoeffs,
    psi: &SpectralCoeffs,
    fbar: &SpectralCoeffs,
) -> SpectralCoeffs {
    let mut spec = InverseProblemSpec::new(
        p.clone(),
        1.0,
        FunctionData::Coefficients(fbar.clone()),
        2,
        129,
    )
    .unwrap();
    spec.phi = FunctionData::Coefficients(phi.clone());
    spec.psi = FunctionData::Coefficients(psi.clone());
    spec.convolution = ConvolutionMethod::Grid;
    solve(&spec).unwrap().source_coeffs
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn inverse_solve_is_linear(
        a in prop::collection::vec(-1.0f64..1.0, 15),
        b in prop::collection::vec(-1.0f64..1.0, 15),
        rho in 0.3f64..0.95,
    ) {
        let p = LevelParams::new(rho, &[0.5 * (1.0 - rho), 0.9]).unwrap();
        let (pa, sa, fa) = (coeffs(&a[0..5]), coeffs(&a[5..10]), coeffs(&a[10..15]));
        let (pb, sb, fb) = (coeffs(&b[0..5]), coeffs(&b[5..10]), coeffs(&b[10..15]));
        let sum = solve_with(&p, &pa.add_scaled(&pb, 1.0), &sa.add_scaled(&sb, 1.0), &fa.add_scaled(&fb, 1.0));
        let parts = solve_with(&p, &pa, &sa, &fa).add_scaled(&solve_with(&p, &pb, &sb, &fb), 1.0);
        let scale = sum.max_abs_diff(&SpectralCoeffs::zeros(2)).max(1.0);
        prop_assert!(sum.max_abs_diff(&parts) <= 1e-9 * scale);
    }

    #[test]
    fn modes_decouple(k in 1usize..=3, v in -1.0f64..1.0) {
        let p = LevelParams::new(0.6, &[0.1, 0.8]).unwrap();
        let mut fbar = SpectralCoeffs::zeros(3);
        fbar.set(EigenIndex::one(k).unwrap(), v);
        let spec = InverseProblemSpec::new(p, 1.0, FunctionData::Coefficients(fbar), 3, 129).unwrap();
        let src = solve(&spec).unwrap().source_coeffs;
        for idx in EigenIndex::all(3) {
            if idx.k != k {
                prop_assert!(src.get(idx).abs() <= 1e-9);
            }
        }
    }
}
