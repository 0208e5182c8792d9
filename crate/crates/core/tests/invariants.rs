use std::f64::consts::TAU;

use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use hyperwalk::boundary::{busemann, martin_kernel, BoundaryPoint};
use hyperwalk::brownian::{exit_density_ratio, harnack_constant, sphere_point, BallDomain};
use hyperwalk::hypspace::{distance, fline, project, Isometry};
use hyperwalk::lattice::{halfplane_distance, reduce_to_domain, Letter, Word};
use hyperwalk::walk::{MeasureFamily, WordBall};
use hyperwalk::{Field, Space};

fn space() -> impl Strategy<Value = Space> {
    (prop_oneof![Just(Field::R), Just(Field::C), Just(Field::H)], 1usize..=3).prop_map(|(field, k)| Space { field, k })
}

fn word(max: usize) -> impl Strategy<Value = Word> {
    prop::collection::vec(0usize..4, 0..max)
        .prop_map(|v| Word::reduce(&v.into_iter().map(Letter::from_index).collect::<Vec<_>>()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn distance_is_a_metric(s in space(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (x, y, z) = (s.random_point(3.0, &mut rng), s.random_point(3.0, &mut rng), s.random_point(3.0, &mut rng));
        let (dxy, dyz, dxz) = (distance(&x, &y).unwrap(), distance(&y, &z).unwrap(), distance(&x, &z).unwrap());
        prop_assert!((dxy - distance(&y, &x).unwrap()).abs() < 1e-12);
        prop_assert!(dxz <= dxy + dyz + 1e-9);
        prop_assert!(distance(&x, &x).unwrap() < 1e-6);
    }

    #[test]
    fn isometries_preserve_distance(s in space(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = Isometry::random(s, &mut rng, 3);
        let (x, y) = (s.random_point(2.0, &mut rng), s.random_point(2.0, &mut rng));
        let d = distance(&x, &y).unwrap();
        prop_assert!((distance(&g.apply(&x), &g.apply(&y)).unwrap() - d).abs() < 1e-9);
    }

    #[test]
    fn projection_is_idempotent_and_nearest(s in space(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (y1, y2, z) = (s.random_point(2.0, &mut rng), s.random_point(2.0, &mut rng), s.random_point(2.0, &mut rng));
        let line = fline(&y1, &y2).unwrap();
        let pz = project(&z, &line).unwrap();
        prop_assert!(distance(&project(&pz, &line).unwrap(), &pz).unwrap() < 1e-6);
        let other = project(&s.random_point(2.0, &mut rng), &line).unwrap();
        prop_assert!(distance(&z, &pz).unwrap() <= distance(&z, &other).unwrap() + 1e-9);
    }

    #[test]
    fn busemann_differences_are_isometry_equivariant(s in space(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let o = s.origin();
        let xi = BoundaryPoint::random(s, &o, &mut rng);
        let (x, y) = (s.random_point(2.0, &mut rng), s.random_point(2.0, &mut rng));
        let g = Isometry::random(s, &mut rng, 2);
        let gxi = BoundaryPoint::from_null(g.apply_vec(xi.lift()), &o).unwrap();
        let before = busemann(&x, &xi) - busemann(&y, &xi);
        let after = busemann(&g.apply(&x), &gxi) - busemann(&g.apply(&y), &gxi);
        prop_assert!((before - after).abs() < 1e-8);
        prop_assert!((martin_kernel(&o, &xi) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn word_ball_indexing_round_trips(w in word(9)) {
        let ball = WordBall::new(8);
        match ball.index_of(&w) {
            Some(i) => {
                prop_assert_eq!(ball.word_at(i), w.clone());
                prop_assert_eq!(ball.len_of(i), w.len());
                if let Some(p) = ball.parent(i) {
                    let last = *w.letters().last().unwrap();
                    prop_assert_eq!(ball.mul_letter(p, last), Some(i));
                }
            }
            None => prop_assert!(w.len() > 8),
        }
    }

    #[test]
    fn domain_reduction_lands_in_the_domain(x in -20.0f64..20.0, y in 0.01f64..5.0) {
        let z = Complex64::new(x, y);
        let (g, r) = reduce_to_domain(z);
        prop_assert!(r.re.abs() <= 1.0 + 1e-9);
        prop_assert!((r - 0.5).norm() >= 0.5 - 1e-9 && (r + 0.5).norm() >= 0.5 - 1e-9);
        prop_assert!(halfplane_distance(g.evaluate().apply(r), z) < 1e-7);
    }

    #[test]
    fn density_ratio_obeys_harnack(rf in 0.05f64..0.5, gap in 0.1f64..1.0, r in 0.0f64..1.0, a in 0.0f64..TAU, b in 0.0f64..TAU) {
        let rv = rf + gap;
        let v = BallDomain::new(Complex64::new(0.0, 1.0), rv).unwrap();
        let y = sphere_point(rf * r, a);
        let w = v.uniformizer().from_disk(Complex64::from_polar(1.0, b));
        let ratio = exit_density_ratio(y, &v, w).unwrap();
        let c = harnack_constant(rf, rv).unwrap();
        prop_assert!(ratio >= 1.0 / c * (1.0 - 1e-9) && ratio <= c * (1.0 + 1e-9));
    }

    #[test]
    fn measures_round_trip_through_jsonl(ws in prop::collection::vec((word(4), 0.01f64..1.0), 1..6)) {
        let total: f64 = ws.iter().map(|e| e.1).sum();
        let Ok(mu) = MeasureFamily::new(ws.iter().map(|(w, p)| (w.clone(), p / total))) else {
            return Ok(());
        };
        let mut buf = Vec::new();
        mu.write_jsonl(&mut buf).unwrap();
        let back = MeasureFamily::read_jsonl(&buf[..]).unwrap();
        for (w, _) in &ws {
            prop_assert!((back.prob(w) - mu.prob(w)).abs() < 1e-15);
        }
    }
}
