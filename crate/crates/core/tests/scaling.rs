//! Cost-growth checks for the offline point selection and the online rule.
//! Timings take the fastest of several repeats; the two tests share a lock so
//! they never time each other.

use std::hint::black_box;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use roq_core::eim::build_deim;
use roq_core::linalg::{ComplexMatrix, C64};
use roq_core::quadrature::gauss_legendre_rule;
use roq_core::roq::{roq_inner_product, RoqRule};

static CLOCK: Mutex<()> = Mutex::new(());

fn fastest<F: FnMut()>(repeats: usize, mut f: F) -> Duration {
    (0..repeats)
        .map(|_| {
            let t = Instant::now();
            f();
            t.elapsed()
        })
        .min()
        .unwrap()
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<C64> {
    (0..n)
        .map(|_| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
        .collect()
}

#[test]
fn deim_selection_grows_quadratically_in_basis_size() {
    let _clock = CLOCK.lock().unwrap_or_else(|e| e.into_inner());
    let rows = 6000;
    let rule = gauss_legendre_rule(rows).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let cols: Vec<Vec<C64>> = (0..240).map(|_| random_vec(&mut rng, rows)).collect();
    let v = ComplexMatrix::from_columns(rows, &cols).unwrap();

    let time = |n: usize| {
        let sub = v.leading_columns(n);
        fastest(5, || {
            let op = build_deim(&sub, &rule).unwrap();
            assert_eq!(op.len(), n);
        })
    };
    let (small, large) = (time(120), time(240));
    let ratio = large.as_secs_f64() / small.as_secs_f64();
    assert!(
        ratio <= 4.6,
        "doubling the basis multiplied the time by {ratio:.2} ({small:?} -> {large:?})"
    );
}

#[test]
fn rule_evaluation_is_linear_in_its_size() {
    let _clock = CLOCK.lock().unwrap_or_else(|e| e.into_inner());
    let parent = gauss_legendre_rule(400).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let rule = |m: usize, rng: &mut ChaCha8Rng| RoqRule {
        point_indices: (0..m).collect(),
        points: (0..m).map(|i| vec![parent.node(i)[0]]).collect(),
        weights: random_vec(rng, m),
        parent_rule: parent.clone(),
        basis_ref: String::new(),
        by_hand_override: None,
    };

    let calls = 20_000;
    let mut per_node = Vec::new();
    for m in [50, 100, 200, 339] {
        let roq = rule(m, &mut rng);
        let (mut a, b) = (random_vec(&mut rng, m), random_vec(&mut rng, m));
        // exactly m samples per side; any other length is refused
        assert!(roq_inner_product(&roq, &a[1..], &b).is_err());
        let a0 = a[0];
        let t = fastest(7, || {
            // each call feeds the next so short sums cannot overlap in the pipeline
            let mut acc = C64::new(0.0, 0.0);
            for _ in 0..calls {
                a[0] = a0 + acc * 1e-300;
                acc = roq_inner_product(black_box(&roq), black_box(&a), black_box(&b)).unwrap();
            }
            black_box(acc);
        });
        per_node.push(t.as_secs_f64() / m as f64);
    }
    let base = per_node[0];
    for (m, t) in [50, 100, 200, 339].iter().zip(&per_node) {
        assert!(
            t / base <= 1.5,
            "per-node cost at m={m} is {:.2}x the m=50 cost: {per_node:?}",
            t / base
        );
    }
}
