//! Property-based invariants over randomized inputs.

use num_complex::Complex64;
use proptest::prelude::*;

use smoothing_lab::config::ExperimentConfig;
use smoothing_lab::grid::{
    forward_transform, inverse_transform, l2_norm, make_grid, zero_out_mean, ComplexField,
    fractional_multiplier, GridSpec, Side,
};
use smoothing_lab::propagator::evolve;
use smoothing_lab::sphere::DyadicCutoff;
use smoothing_lab::weights::{dyadic_cubes, parse_weight_id, BaseBox};

fn small_grid() -> impl Strategy<Value = GridSpec> {
    (1usize..=3, 0usize..=1, 0.5f64..4.0).prop_map(|(dim, bump, half_width)| {
        let n = match dim {
            1 => 32 << bump,
            2 => 8 << bump,
            _ => 8,
        };
        make_grid(dim, n, half_width).unwrap()
    })
}

fn field_on(grid: &GridSpec, seed: u64) -> ComplexField {
    use rand::prelude::*;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let samples = (0..grid.len())
        .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
        .collect();
    ComplexField::from_samples(grid, Side::Physical, samples)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn transform_round_trip_and_parseval(grid in small_grid(), seed in any::<u64>()) {
        let f = field_on(&grid, seed);
        let fh = forward_transform(&f).unwrap();
        let back = inverse_transform(&fh).unwrap();
        let scale = l2_norm(&f).max(1e-300);
        let err = f.samples.iter().zip(&back.samples)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0f64, f64::max);
        prop_assert!(err / scale < 1e-12);
        let lhs = l2_norm(&f).powi(2);
        let rhs = l2_norm(&fh).powi(2)
            * (2.0 * std::f64::consts::PI).powi(-(grid.dim() as i32));
        prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs);
    }

    #[test]
    fn multiplier_additive_in_exponent(
        grid in small_grid(),
        seed in any::<u64>(),
        s1 in 0.05f64..1.0,
        s2 in 0.05f64..1.0,
    ) {
        let f = field_on(&grid, seed);
        let fh = zero_out_mean(&forward_transform(&f).unwrap()).unwrap();
        let a = fractional_multiplier(&fractional_multiplier(&fh, s1).unwrap(), s2).unwrap();
        let b = fractional_multiplier(&fh, s1 + s2).unwrap();
        let scale = l2_norm(&fh).max(1e-300);
        for (x, y) in a.samples.iter().zip(&b.samples) {
            prop_assert!((x - y).norm() <= 1e-11 * scale);
        }
    }

    #[test]
    fn evolution_group_law_and_unitarity(
        grid in small_grid(),
        seed in any::<u64>(),
        t1 in -2.0f64..2.0,
        t2 in -2.0f64..2.0,
        gamma in 1.05f64..3.0,
    ) {
        let f = field_on(&grid, seed);
        let norm = l2_norm(&f);
        let one = evolve(&evolve(&f, t1, gamma).unwrap(), t2, gamma).unwrap();
        let two = evolve(&f, t1 + t2, gamma).unwrap();
        prop_assert!((l2_norm(&one) / norm - 1.0).abs() < 1e-12);
        for (x, y) in one.samples.iter().zip(&two.samples) {
            prop_assert!((x - y).norm() <= 1e-11 * norm);
        }
    }

    #[test]
    fn catalog_weights_are_nonnegative(
        kind in 0usize..4,
        a in 0.2f64..1.9,
        w in 0.2f64..3.0,
        amp in 0.0f64..5.0,
        x0 in -4.0f64..4.0,
        x1 in -4.0f64..4.0,
        cap in 0.01f64..0.5,
    ) {
        let id = match kind {
            0 => format!("power:a={a}"),
            1 => format!("bump:c=0,w={w},A={amp}"),
            2 => "indicator:lo=-1,side=2".to_string(),
            _ => format!("uniform:c={amp}"),
        };
        let weight = parse_weight_id(&id, 2).unwrap();
        let v = weight.eval_capped(&[x0, x1], cap).unwrap();
        prop_assert!(v >= 0.0 && v.is_finite(), "{id} at ({x0},{x1}) -> {v}");
        // Round-trip through the canonical id.
        let again = parse_weight_id(&weight.to_id(), 2).unwrap();
        prop_assert!((again.eval_capped(&[x0, x1], cap).unwrap() - v).abs() <= 1e-15 * v.abs().max(1.0));
    }

    #[test]
    fn dyadic_levels_tile_and_nest(dim in 1usize..=3, levels in 0i32..3) {
        let base = BaseBox::symmetric(dim, 1.0);
        let cubes = dyadic_cubes(&base, -1, levels, 0.0).unwrap();
        for j in -1..=levels {
            let level: Vec<_> = cubes.iter().filter(|c| c.level == j).collect();
            let volume: f64 = level.iter().map(|c| c.side.powi(dim as i32)).sum();
            prop_assert!((volume - (2.0f64).powi(dim as i32)).abs() < 1e-12);
        }
        for cube in cubes.iter().filter(|c| c.level >= 1) {
            let parent_idx: Vec<i64> = cube.corner_index.iter().map(|i| i >> 1).collect();
            let parent = cubes
                .iter()
                .find(|p| p.level == cube.level - 1 && p.corner_index == parent_idx);
            prop_assert!(parent.is_some());
            let parent = parent.unwrap();
            prop_assert!(parent.contains(&cube.center()));
        }
    }

    #[test]
    fn cutoff_partition_of_unity(t in 0.0f64..100.0) {
        let j_max = 9u32; // covers t < 256
        let total: f64 = (0..=j_max).map(|j| DyadicCutoff::psi(j, t)).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        for j in 0..=j_max {
            let v = DyadicCutoff::psi(j, t);
            prop_assert!((-1e-15..=1.0 + 1e-15).contains(&v));
            let (lo, hi) = DyadicCutoff::support(j);
            if t < lo || t > hi {
                prop_assert!(v == 0.0);
            }
        }
    }

    #[test]
    fn config_canonical_round_trip(
        seed in any::<u64>(),
        n in 8usize..=256,
        dim in 1usize..=3,
        half in 0.5f64..64.0,
        alpha in 0.1f64..1.9,
        t in 0.1f64..8.0,
        count in 1usize..32,
    ) {
        let n = n.next_power_of_two().max(8);
        let text = format!(
            "[run]\nseed = {seed}\n[grid]\ndim = {dim}\npoints_per_axis = {n}\nhalf_width = {half}\n\
             [params]\nalpha = {alpha}\n[weight]\nid = power:a=1.0\n[evolution]\nt = {t}\n\
             [family]\ncount = {count}\nsigma_x = 2.0\n[scan]\nlevels = 3\n"
        );
        let cfg = ExperimentConfig::from_text(&text).unwrap();
        let dump = cfg.to_canonical_text();
        let back = ExperimentConfig::from_text(&dump).unwrap();
        prop_assert_eq!(&cfg, &back);
        prop_assert_eq!(dump.clone(), back.to_canonical_text());
    }
}
