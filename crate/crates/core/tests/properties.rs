use metric_knn_lab::experiments::{parse_grid, Table, Value};
use metric_knn_lab::knn::{select_neighbors, LabeledPoint, LabeledSample, TieBreakPolicy};
use metric_knn_lab::measure::{b_alpha, extended_ball_measure, NestedBallModel, ProbabilityModel, SeqProductModel, UniformCube};
use metric_knn_lab::metric::{heis_dilate, heis_inv, heis_mul, HeisPoint, NestedBallSpace, Point, Space};
use proptest::prelude::*;

fn heis() -> impl Strategy<Value = HeisPoint> {
    (-10.0..10.0f64, -10.0..10.0f64, -100.0..100.0f64).prop_map(|(x, y, z)| HeisPoint::new(x, y, z))
}

fn word() -> impl Strategy<Value = Point> {
    prop::collection::vec(0..3u8, 0..8).prop_map(Point::seq)
}

fn policy() -> impl Strategy<Value = TieBreakPolicy> {
    prop_oneof![
        Just(TieBreakPolicy::ByIndex),
        Just(TieBreakPolicy::UniformRandom),
        Just(TieBreakPolicy::Dgkl)
    ]
}

proptest! {
    #[test]
    fn euclidean_metric_axioms(p in prop::collection::vec(-5.0..5.0f64, 9)) {
        let s = Space::Euclidean { dim: 3 };
        let (a, b, c) = (Point::euclidean(&p[0..3]), Point::euclidean(&p[3..6]), Point::euclidean(&p[6..9]));
        let d = |x: &Point, y: &Point| s.distance(x, y).unwrap();
        prop_assert_eq!(d(&a, &a), 0.0);
        prop_assert_eq!(d(&a, &b), d(&b, &a));
        prop_assert!(d(&a, &c) <= (d(&a, &b) + d(&b, &c)) * (1.0 + 1e-12));
    }

    #[test]
    fn words_are_ultrametric(a in word(), b in word(), c in word()) {
        let s = Space::UltrametricSeq;
        let d = |x: &Point, y: &Point| s.distance(x, y).unwrap();
        prop_assert_eq!(d(&a, &b), d(&b, &a));
        prop_assert_eq!(d(&a, &b) == 0.0, a == b);
        prop_assert!(d(&a, &c) <= d(&a, &b).max(d(&b, &c)));
    }

    #[test]
    fn nested_ball_is_ultrametric(a in 0..1000u64, b in 0..1000u64, c in 0..1000u64) {
        let s = Space::NestedBall(NestedBallSpace::default());
        let d = |x: u64, y: u64| s.distance(&Point::nested(x), &Point::nested(y)).unwrap();
        prop_assert_eq!(d(a, b), d(b, a));
        prop_assert!(d(a, c) <= d(a, b).max(d(b, c)));
    }

    #[test]
    fn heisenberg_group_laws(p in heis(), q in heis(), t in 0.1..10.0f64) {
        let s = Space::Heisenberg;
        let d = |a: HeisPoint, b: HeisPoint| s.distance(&Point::Heis(a), &Point::Heis(b)).unwrap();
        let e = heis_mul(p, heis_inv(p));
        prop_assert!(e.x.abs() < 1e-12 && e.y.abs() < 1e-12 && e.z.abs() < 1e-9);
        let base = d(p, q);
        let scaled = d(heis_dilate(p, t).unwrap(), heis_dilate(q, t).unwrap());
        prop_assert!((scaled - t * base).abs() <= 1e-9 * (t * base).max(1e-12));
        prop_assert!((d(p, q) - d(q, p)).abs() <= 1e-12 * base.max(1.0));
    }

    #[test]
    fn neighbour_set_contract(
        xs in prop::collection::vec((0..6u8, 0..2u8, 0.0..1.0f64), 1..40),
        q in 0..6u8,
        k_frac in 0.0..1.0f64,
        pol in policy(),
        qz in 0.0..1.0f64,
    ) {
        // a coarse grid so that ties are common
        let space = Space::Euclidean { dim: 1 };
        let points: Vec<LabeledPoint> = xs
            .iter()
            .map(|&(x, y, z)| LabeledPoint { x: Point::euclidean([x as f64]), y, z })
            .collect();
        let sample = LabeledSample::new(space, points).unwrap();
        let k = 1 + (k_frac * (sample.len() - 1) as f64) as usize;
        let x = Point::euclidean([q as f64]);
        let nb = select_neighbors(&sample, &x, k, pol, qz).unwrap();
        prop_assert_eq!(nb.indices.len(), k);
        let mut seen = nb.indices.clone();
        seen.sort_unstable();
        seen.dedup();
        prop_assert_eq!(seen.len(), k);
        let dist: Vec<f64> = sample.points.iter().map(|p| space.distance(&x, &p.x).unwrap()).collect();
        prop_assert!(nb.indices.iter().all(|&i| dist[i] <= nb.radius));
        let closer = dist.iter().filter(|&&d| d < nb.radius).count();
        prop_assert!(closer < k);
        prop_assert_eq!(nb.tied, dist.iter().filter(|&&d| d == nb.radius).count());
        prop_assert!(closer + nb.tied >= k);
    }

    #[test]
    fn alpha_radius_is_lipschitz(a in 0.0..1.0f64, b in 0.0..1.0f64, alpha in 0.001..1.0f64) {
        let model = ProbabilityModel::UniformCube(UniformCube::new(1).unwrap());
        let (x, y) = (Point::euclidean([a]), Point::euclidean([b]));
        let gap = (model.r_alpha(&x, alpha).unwrap() - model.r_alpha(&y, alpha).unwrap()).abs();
        prop_assert!(gap <= (a - b).abs() + 1e-9);
    }

    #[test]
    fn extended_ball_hits_alpha(n in 0..5000u64, w in prop::collection::vec(0..2u8, 6), z in 0.0..1.0f64, alpha in 0.001..0.999f64) {
        let nested = ProbabilityModel::Nested(NestedBallModel::default());
        let cantor = ProbabilityModel::SeqProduct(SeqProductModel::uniform(6, 2).unwrap());
        for (model, x) in [(nested, Point::nested(n)), (cantor, Point::seq(w.clone()))] {
            let r = model.r_alpha(&x, alpha).unwrap();
            let b = b_alpha(&model, &x, z, alpha).unwrap();
            prop_assert!((0.0..=1.0).contains(&b));
            let m = extended_ball_measure(&model, &x, z, r, b).unwrap().value;
            prop_assert!((m - alpha).abs() < 1e-9, "{} vs {}", m, alpha);
        }
    }

    #[test]
    fn csv_round_trip(rows in prop::collection::vec((any::<f64>(), any::<i32>(), any::<bool>()), 0..20)) {
        let mut t = Table::new(&["real", "int", "flag"]);
        for &(x, i, f) in &rows {
            t.push(vec![Value::Real(x), Value::Int(i as i64), Value::Flag(f)]);
        }
        let bytes = t.to_csv().unwrap();
        let mut reader = csv::Reader::from_reader(bytes.as_slice());
        prop_assert_eq!(reader.headers().unwrap().iter().collect::<Vec<_>>(), vec!["real", "int", "flag"]);
        let back: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
        prop_assert_eq!(back.len(), rows.len());
        for (rec, &(x, i, f)) in back.iter().zip(&rows) {
            let parsed: f64 = rec[0].parse().unwrap();
            prop_assert!(parsed == x || (parsed.is_nan() && x.is_nan()));
            prop_assert_eq!(rec[1].parse::<i64>().unwrap(), i as i64);
            prop_assert_eq!(rec[2].parse::<bool>().unwrap(), f);
        }
    }

    #[test]
    fn geometric_grids(a in -20..20i32, b in -20..20i32) {
        let g = parse_grid(&format!("2^{a}..2^{b}")).unwrap();
        prop_assert_eq!(g.len() as i32, (a - b).abs() + 1);
        prop_assert_eq!(g[0], 2f64.powi(a));
        prop_assert_eq!(*g.last().unwrap(), 2f64.powi(b));
    }
}
