use dnls_core::backlund::{eigenfunction, EigenConfig};
use dnls_core::field::{SampleEncoding, GN_QUINTIC_SHARP};
use dnls_core::jost::{a_ode, a_tilde_ode, scattering};
use dnls_core::linalg::{det_n, Dense};
use dnls_core::{Field, GnKind, Grid, JostConfig, Snapshot, SolitonParams, SpectralPoint};
use num_complex::Complex64 as C64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

/// A sum of up to three modulated Gaussians, well inside [-20, 20).
fn bumps() -> impl Strategy<Value = Vec<(f64, f64, f64, f64, f64)>> {
    prop::collection::vec((-0.6f64..0.6, -0.6f64..0.6, 0.6f64..2.0, -4.0f64..4.0, -1.5f64..1.5), 1..4)
}

fn field(grid: Grid, parts: &[(f64, f64, f64, f64, f64)]) -> Field {
    Field::from_fn(grid, |x| parts.iter().map(|&(re, im, w, x0, k)| C64::new(re, im) * (-((x - x0) / w).powi(2)).exp() * C64::from_polar(1.0, k * x)).sum())
        .unwrap()
}

fn small_grid() -> Grid {
    Grid::new(20.0, 2048).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

    #[test]
    fn quintic_ratio_below_sharp_constant(parts in bumps()) {
        let f = field(small_grid(), &parts);
        prop_assume!(f.mass() > 1e-6);
        prop_assert!(f.gn_ratio(GnKind::Quintic).unwrap() <= GN_QUINTIC_SHARP + 1e-6);
    }

    #[test]
    fn conserved_quantities_scale(parts in bumps(), up in any::<bool>()) {
        let f = field(small_grid(), &parts);
        let mu = if up { 2.0 } else { 0.5 };
        let (c, s) = (f.conserved(), f.rescale(mu).unwrap().conserved());
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-6 * b.abs().max(1e-8);
        prop_assert!(close(s.mass, c.mass));
        prop_assert!(close(s.momentum, mu * c.momentum));
        prop_assert!(close(s.energy, mu * mu * c.energy));
    }

    #[test]
    fn snapshot_round_trip(parts in bumps(), plain in any::<bool>()) {
        let f = field(small_grid(), &parts);
        let enc = if plain { SampleEncoding::Plain } else { SampleEncoding::Base64 };
        let text = serde_json::to_string(&Snapshot::from_field(&f, 0.25, enc)).unwrap();
        let back: Snapshot = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back.to_field().unwrap(), f);
    }

    #[test]
    fn soliton_profile_even_and_mass_bounded(e in 0.01f64..4.0, c in -1.9f64..1.9, x in 0.0f64..30.0) {
        let p = SolitonParams::new(e, c).unwrap();
        let (l, r) = (p.profile(-x), p.profile(x));
        prop_assert!((l - r).abs() <= 1e-12 * r.abs().max(1e-300));
        prop_assert!(p.mass() <= 4.0 * PI + 1e-12);
    }

    #[test]
    fn exact_a_is_a_phase_on_the_real_axes(e in 0.2f64..3.0, c in -1.0f64..1.0, l in 0.05f64..3.0, imag in any::<bool>()) {
        let p = SolitonParams::new(e, c).unwrap();
        let lambda = if imag { C64::new(0.0, l) } else { C64::new(l, 0.0) };
        prop_assert!((p.exact_a(lambda).unwrap().norm() - 1.0).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, ..ProptestConfig::default() })]

    #[test]
    fn a_even_in_lambda(parts in bumps(), r in 0.2f64..2.0, t in 0.0f64..(PI / 2.0)) {
        let f = field(small_grid(), &parts);
        let lam = C64::from_polar(r, t);
        let cfg = JostConfig::default();
        let a = a_ode(&f, SpectralPoint::from_lambda(lam).unwrap(), &cfg).unwrap();
        let b = a_ode(&f, SpectralPoint::from_lambda(-lam).unwrap(), &cfg).unwrap();
        prop_assert!((a - b).norm() <= 1e-10);
    }

    #[test]
    fn real_axis_moduli_and_transfer_determinant(parts in bumps(), xi in 0.05f64..3.0) {
        let f = field(small_grid(), &parts);
        let cfg = JostConfig::default();
        prop_assert!(a_tilde_ode(&f, C64::new(-xi, 0.0), &cfg).unwrap().norm() >= 1.0 - 1e-6);
        prop_assert!(a_tilde_ode(&f, C64::new(xi, 0.0), &cfg).unwrap().norm() <= 1.0 + 1e-6);
        // random fields are rougher than the fixtures, so refine the RK4 step for the 1e-8 checks
        let fine = JostConfig { substeps: 2, ..cfg };
        let s = scattering(&f, SpectralPoint::from_lambda(C64::new(xi.sqrt(), 0.0)).unwrap(), &fine).unwrap();
        prop_assert!(s.residual < 1e-8, "det t - 1 = {}", s.residual);
        prop_assert!(s.unitarity_defect().unwrap().abs() < 1e-8);
    }

    #[test]
    fn a_tilde_scaling_law(parts in bumps(), mu in 0.5f64..2.0, r in 0.3f64..3.0, t in 0.2f64..(PI - 0.2)) {
        let f = field(small_grid(), &parts);
        let g = f.rescale(mu).unwrap();
        let z = C64::from_polar(r, t);
        let cfg = JostConfig::default();
        let lhs = a_tilde_ode(&g, z, &cfg).unwrap();
        let rhs = a_tilde_ode(&f, z / mu, &cfg).unwrap();
        prop_assert!((lhs - rhs).norm() < 1e-5, "{lhs} vs {rhs}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 8, ..ProptestConfig::default() })]

    #[test]
    fn backlund_data_invariants(e in 0.5f64..1.5, c in -0.8f64..0.8) {
        let p = SolitonParams::new(e, c).unwrap();
        let f = dnls_core::soliton::field_at(&p, 0.0, Grid::new(40.0, 4096).unwrap()).unwrap();
        let bd = eigenfunction(&f, p.eigenvalue(), &EigenConfig::default()).unwrap();
        let (g, s) = bd.invariant_defects().unwrap();
        prop_assert!(g < 1e-10 && s < 1e-10, "{g} {s}");
    }
}

fn random_block(rng: &mut ChaCha8Rng, n: usize, lo: usize, hi: usize, norm: f64) -> Dense {
    let mut m = Dense::zeros(n);
    for i in lo..hi {
        for j in lo..hi {
            m[(i, j)] = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        }
    }
    let s = norm / m.hs_norm_sq().sqrt();
    m.scaled(C64::new(s, 0.0))
}

/// A on the first half of the coordinates, B on the second, B leaking into the
/// first half with weight delta, so that ||AB||, ||BA|| = O(delta).
fn product_defect(seed: u64, delta: f64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 16;
    let a = random_block(&mut rng, n, 0, 8, 0.5);
    let b = random_block(&mut rng, n, 8, 16, 0.5).add(&random_block(&mut rng, n, 0, 16, delta));
    let eps = a.mul(&b).hs_norm_sq().sqrt().max(b.mul(&a).hs_norm_sq().sqrt());
    let lhs = det_n(&a.add(&b), 4);
    let rhs = det_n(&a, 4) * det_n(&b, 4);
    ((lhs - rhs).norm(), eps)
}

#[test]
fn product_identity_is_linear_in_epsilon() {
    let fit = |delta: f64| (0..64).map(|s| product_defect(s, delta)).map(|(d, e)| d / e).fold(0.0, f64::max);
    let c2 = fit(1e-2);
    let c4 = fit(1e-4);
    eprintln!("fitted C: {c2:.4} at delta 1e-2, {c4:.4} at delta 1e-4");
    assert!(c2 < 10.0 && c4 < 10.0);
    // the same constant works across two decades of epsilon
    assert!(c4 / c2 < 3.0 && c2 / c4 < 3.0);
    for s in 100..164 {
        let (d, e) = product_defect(s, 1e-3);
        assert!(d <= 3.0 * c2.max(c4) * e, "seed {s}: {d} vs eps {e}");
    }
}

#[test]
fn product_identity_exact_for_orthogonal_blocks() {
    let (d, e) = product_defect(7, 0.0);
    assert_eq!(e, 0.0);
    assert!(d < 1e-14);
}
