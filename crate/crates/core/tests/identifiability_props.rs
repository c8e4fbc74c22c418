use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use num_rational::Ratio;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use spaceiv_core::graph::random_coefficient;
use spaceiv_core::identifiability::{
    check_a1, check_a2, check_a3, identified_coordinate_estimates, identify, partial_identifiability, IdentOptions,
};
use spaceiv_core::linalg::{lstsq, projection_residual, rank, same_image, DEFAULT_RANK_TOL};
use spaceiv_core::model::{MomentSystem, NoiseSpec, Scm};

type Q = Ratio<i64>;

/// Coordinates that vanish on the exact rational null space of `c`.
fn exact_identifiable(c: &[Vec<i64>]) -> Vec<bool> {
    let (m, d) = (c.len(), c[0].len());
    let mut a: Vec<Vec<Q>> = c.iter().map(|r| r.iter().map(|&x| Q::from_integer(x)).collect()).collect();
    let mut pivots = Vec::new();
    let mut row = 0;
    for col in 0..d {
        let Some(p) = (row..m).find(|&r| a[r][col] != Q::from_integer(0)) else {
            continue;
        };
        a.swap(row, p);
        let lead = a[row][col];
        for x in a[row].iter_mut() {
            *x /= lead;
        }
        for r in 0..m {
            if r != row && a[r][col] != Q::from_integer(0) {
                let f = a[r][col];
                let pivot_row = a[row].clone();
                for (x, v) in a[r].iter_mut().zip(pivot_row) {
                    *x -= f * v;
                }
            }
        }
        pivots.push(col);
        row += 1;
        if row == m {
            break;
        }
    }
    let free: Vec<usize> = (0..d).filter(|j| !pivots.contains(j)).collect();
    // Null basis vector for free column f: x_f = 1, x_pivot(r) = -a[r][f].
    (0..d)
        .map(|j| {
            free.iter().all(|&f| {
                if j == f {
                    return false;
                }
                match pivots.iter().position(|&p| p == j) {
                    Some(r) => a[r][f] == Q::from_integer(0),
                    None => true,
                }
            })
        })
        .collect()
}

#[test]
fn partial_identifiability_matches_exact_null_space() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut mixed = 0;
    for _ in 0..500 {
        let m = rng.random_range(1..=5);
        let d = rng.random_range(1..=5);
        let mut c: Vec<Vec<i64>> = (0..m)
            .map(|_| (0..d).map(|_| if rng.random_bool(0.4) { 0 } else { rng.random_range(-3..=3) }).collect())
            .collect();
        // Plant integer column dependencies so null spaces are not always trivial.
        if d >= 3 && rng.random_bool(0.5) {
            let (i, j, k) = (0, 1, d - 1);
            let (u, v) = (rng.random_range(-2..=2), rng.random_range(-2..=2));
            for r in c.iter_mut() {
                r[k] = u * r[i] + v * r[j];
            }
        }
        let oracle = exact_identifiable(&c);
        let flat: Vec<f64> = c.iter().flatten().map(|&x| x as f64).collect();
        let cm = DMatrix::from_row_slice(m, d, &flat);
        assert_eq!(partial_identifiability(&cm, DEFAULT_RANK_TOL), oracle, "{cm}");
        if oracle.iter().any(|&x| x) && oracle.iter().any(|&x| !x) {
            mixed += 1;
        }
    }
    assert!(mixed > 20, "too few informative draws: {mixed}");
}

#[test]
fn partial_identifiability_examples() {
    assert_eq!(partial_identifiability(&DMatrix::identity(3, 3), DEFAULT_RANK_TOL), vec![true; 3]);
    let c = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 1.0]);
    assert_eq!(partial_identifiability(&c, DEFAULT_RANK_TOL), vec![true, false, false]);
    let beta = DVector::from_vec(vec![2.0, 1.0, 1.0]);
    let moments = MomentSystem { cov_iy: &c * &beta, cov_ix: c };
    let (est, mask) = identified_coordinate_estimates(&moments, DEFAULT_RANK_TOL);
    assert_eq!(mask, vec![true, false, false]);
    assert!((est[0] - 2.0).abs() < 1e-12);
}

/// X3 := X1 + 2 X2, I1 -> X1 (4), I2 -> X2 (3), Y := X1 + 2 X2.
fn matched_coefficients_model() -> Scm {
    let mut b = DMatrix::zeros(3, 3);
    b[(2, 0)] = 1.0;
    b[(2, 1)] = 2.0;
    let a = DMatrix::from_row_slice(3, 2, &[4.0, 0.0, 0.0, 3.0, 0.0, 0.0]);
    Scm::new(b, a, DVector::from_vec(vec![1.0, 2.0, 0.0]), NoiseSpec::standard(3)).unwrap()
}

#[test]
fn matched_coefficients_violate_a2() {
    let scm = matched_coefficients_model();
    let c = scm.total_effect();
    let beta_pa = DVector::from_vec(vec![1.0, 2.0]);
    assert_eq!(check_a2(&c, &[0, 1], &beta_pa, 3, DEFAULT_RANK_TOL, false).unwrap(), Some(vec![2]));
    assert_eq!(partial_identifiability(&c, DEFAULT_RANK_TOL), vec![false; 3]);
    // The sparser solution (0, 0, 1) solves the population moments.
    let moments = MomentSystem::population(&scm);
    assert!(moments.residual(&DVector::from_vec(vec![0.0, 0.0, 1.0])).unwrap().amax() < 1e-12);

    let report = identify(&scm, &IdentOptions::default()).unwrap();
    assert!(report.a1 && !report.a2);
    assert_eq!(report.a2_witness, Some(vec![2]));
    assert_eq!(report.solution_space_dim, 1);
    assert_eq!(report.per_coordinate, vec![false; 3]);
}

#[test]
fn random_coefficients_on_matched_graph_satisfy_a2() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..200 {
        let mut b = DMatrix::zeros(3, 3);
        b[(2, 0)] = random_coefficient(&mut rng);
        b[(2, 1)] = random_coefficient(&mut rng);
        let mut a = DMatrix::zeros(3, 2);
        a[(0, 0)] = random_coefficient(&mut rng);
        a[(1, 1)] = random_coefficient(&mut rng);
        let beta_pa = DVector::from_fn(2, |_, _| random_coefficient(&mut rng));
        let c = spaceiv_core::model::total_effect_matrix(&a, &b).unwrap();
        assert_eq!(check_a2(&c, &[0, 1], &beta_pa, 3, DEFAULT_RANK_TOL, false).unwrap(), None);
    }
}

#[test]
fn a1_and_a3_examples() {
    let c = DMatrix::from_row_slice(2, 3, &[1.0, 1.0, 0.0, 1.0, 2.0, 1.0]);
    assert!(check_a1(&c, &[1], DEFAULT_RANK_TOL));
    assert_eq!(check_a3(&c, &[1], DEFAULT_RANK_TOL), None);
    let dup = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 1.0, 2.0, 1.0, 2.0]);
    assert_eq!(check_a3(&dup, &[0], DEFAULT_RANK_TOL), Some(vec![2]));
    let zero = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 1.0]);
    assert!(!check_a1(&zero, &[0], DEFAULT_RANK_TOL));
}

fn random_model(rng: &mut ChaCha8Rng) -> Scm {
    let d = rng.random_range(2..=8);
    let m = rng.random_range(1..=d);
    let n_pa = rng.random_range(1..=m.min(3));
    let density = rng.random_range(0.2..0.7);
    let mut order: Vec<usize> = (0..d).collect();
    order.shuffle(rng);
    let mut b = DMatrix::zeros(d, d);
    for (p, &j) in order.iter().enumerate() {
        for &i in &order[..p] {
            if rng.random_bool(density) {
                b[(j, i)] = random_coefficient(rng);
            }
        }
    }
    let a = DMatrix::from_fn(d, m, |_, _| if rng.random_bool(density) { random_coefficient(rng) } else { 0.0 });
    let mut beta = DVector::zeros(d);
    for j in rand::seq::index::sample(rng, d, n_pa) {
        beta[j] = random_coefficient(rng);
    }
    Scm::new(b, a, beta, NoiseSpec::standard(d)).unwrap()
}

#[test]
fn a1_and_a3_make_the_parents_the_unique_sparsest_solution() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut tested = 0;
    while tested < 500 {
        let scm = random_model(&mut rng);
        let c = scm.total_effect();
        let pa = scm.parents();
        if !check_a1(&c, &pa, DEFAULT_RANK_TOL) || check_a3(&c, &pa, DEFAULT_RANK_TOL).is_some() {
            continue;
        }
        tested += 1;
        let v = &c * scm.beta_star();
        for size in 1..=pa.len() {
            for set in (0..scm.d()).combinations(size) {
                let c_s = c.select_columns(set.iter());
                let w = lstsq(&c_s, &v, DEFAULT_RANK_TOL);
                let feasible = (&c_s * &w - &v).norm() <= 1e-8 * v.norm();
                assert_eq!(feasible, set == pa, "set {set:?}, parents {pa:?}");
                if feasible {
                    for (k, &j) in set.iter().enumerate() {
                        assert!((w[k] - scm.beta_star()[j]).abs() < 1e-8);
                    }
                }
            }
        }
    }
}

#[test]
fn random_image_avoids_other_subspace() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let gauss =
        |r: usize, c: usize, rng: &mut ChaCha8Rng| DMatrix::from_fn(r, c, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mut hits = 0;
    for _ in 0..1000 {
        let n = rng.random_range(3..=7);
        let m = rng.random_range(1..n);
        let p = rng.random_range(1..=m);
        let a = gauss(n, m, &mut rng);
        let mut b = gauss(n, p, &mut rng);
        // Share part of the image when possible.
        if p > 1 && m > 1 {
            let shared = rng.random_range(1..p.min(m));
            for k in 0..shared {
                b.set_column(k, &a.column(k));
            }
        }
        assert!(rank(&b, DEFAULT_RANK_TOL) <= rank(&a, DEFAULT_RANK_TOL));
        assert!(!same_image(&a, &b, DEFAULT_RANK_TOL));
        let w = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
        if projection_residual(&b, &(&a * w), DEFAULT_RANK_TOL) > 1e-8 {
            hits += 1;
        }
    }
    assert_eq!(hits, 1000);
}

proptest! {
    #[test]
    fn a2_is_monotone_in_max_size(
        entries in proptest::collection::vec(-2i32..=2, 12),
        pa_mask in 1u8..16,
        beta in proptest::collection::vec(-2i32..=2, 4),
    ) {
        let c = DMatrix::from_iterator(3, 4, entries.iter().map(|&x| x as f64));
        let pa: Vec<usize> = (0..4).filter(|j| pa_mask & (1 << j) != 0).collect();
        let beta_pa = DVector::from_iterator(pa.len(), pa.iter().map(|&j| beta[j] as f64));
        let verdicts: Vec<bool> = (1..=4)
            .map(|k| check_a2(&c, &pa, &beta_pa, k, DEFAULT_RANK_TOL, false).unwrap().is_none())
            .collect();
        for k in 1..4 {
            prop_assert!(!verdicts[k] || verdicts[k - 1]);
        }
    }
}
