mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mvc_core::engine::{decide_interior, decide_with_faces, plan_faces, CellAction, DecisionConfig, Verdict};
use mvc_core::multinomial::CountVector;
use mvc_core::oracle::oracle_max_min_pvalue;

fn cv(c: &[u32]) -> CountVector {
    CountVector::new(c.to_vec()).unwrap()
}

fn config(alpha: f64, tau: f64, eps: f64) -> DecisionConfig {
    DecisionConfig::new(alpha, tau, eps)
}

fn assert_valid_witness(a: &[u32], b: &[u32], d: &mvc_core::Decision, alpha: f64, tau: f64) {
    let w = d.witness.as_ref().expect("witness");
    let sum: f64 = w.probs().iter().sum();
    assert!((sum - 1.0).abs() <= 1e-12);
    for r in [a, b] {
        let (_, hi) = common::p_value_bracket(r, w.probs());
        assert!(hi >= alpha + tau - 1e-9, "witness p-value {hi} below {}", alpha + tau);
    }
}

#[test]
fn worked_example_intersects() {
    let (a, b) = ([1, 6, 1], [2, 1, 5]);
    let d = decide_with_faces(&cv(&a), &cv(&b), &config(0.17, 1e-3, 1e-3)).unwrap();
    assert_eq!(d.verdict, Verdict::Intersect);
    assert_eq!(d.face, Some(vec![]));
    assert_valid_witness(&a, &b, &d, 0.17, 1e-3);
}

#[test]
fn identical_outcomes_intersect_near_mle() {
    let a = [1, 6, 1];
    let d = decide_interior(&cv(&a), &cv(&a), &config(0.17, 1e-3, 1e-3)).unwrap();
    assert_eq!(d.verdict, Verdict::Intersect);
    assert_valid_witness(&a, &a, &d, 0.17, 1e-3);
}

#[test]
fn separated_outcomes_are_disjoint() {
    // Grid oracle: max-min p-value ≈ 0.19 here, far below 0.3.
    let d = decide_interior(&cv(&[6, 1, 1]), &cv(&[1, 1, 6]), &config(0.3, 1e-3, 1e-3)).unwrap();
    assert_eq!(d.verdict, Verdict::Disjoint);
    assert_eq!(d.unresolved_count, 0);
    assert!(d.witness.is_none());
}

#[test]
fn same_outcomes_at_lower_level_intersect() {
    let (a, b) = ([6, 1, 1], [1, 1, 6]);
    let d = decide_interior(&cv(&a), &cv(&b), &config(0.17, 1e-3, 1e-3)).unwrap();
    assert_eq!(d.verdict, Verdict::Intersect);
    assert_valid_witness(&a, &b, &d, 0.17, 1e-3);
}

#[test]
fn opposite_corners_are_disjoint() {
    let d = decide_with_faces(&cv(&[8, 0, 0]), &cv(&[0, 0, 8]), &config(0.17, 1e-3, 1e-3)).unwrap();
    assert_eq!(d.verdict, Verdict::Disjoint);
    let faces: Vec<Vec<usize>> = d.faces.iter().map(|f| f.collapsed.clone()).collect();
    assert_eq!(faces, vec![vec![], vec![1]]);
}

#[test]
fn sparse_instance_runs_every_face() {
    // At α = 0.9 no face can be settled (the binomial face peaks at an
    // isolated tie), so all four faces are searched.
    let mut c = config(0.9, 0.01, 1e-2);
    c.max_cells = 20_000;
    let d = decide_with_faces(&cv(&[3, 2, 0, 0]), &cv(&[4, 1, 0, 0]), &c).unwrap();
    let faces: Vec<Vec<usize>> = d.faces.iter().map(|f| f.collapsed.clone()).collect();
    assert_eq!(faces, vec![vec![], vec![2], vec![3], vec![2, 3]]);
    assert_eq!(d.verdict, Verdict::Uncertain);
    assert!(d.unresolved_count > 0);
}

#[test]
fn sparse_faces_each_intersect_and_lift() {
    let (a, b) = (cv(&[3, 2, 0, 0]), cv(&[4, 1, 0, 0]));
    let plan = plan_faces(&a, &b).unwrap();
    for face in &plan.faces {
        let (ra, rb) = face.reduced.as_ref().unwrap();
        let d = decide_with_faces(ra, rb, &config(0.05, 1e-3, 1e-3)).unwrap();
        assert_eq!(d.verdict, Verdict::Intersect, "face {:?}", face.collapsed);
        assert_valid_witness(ra.counts(), rb.counts(), &d, 0.05, 1e-3);
    }
    let d = decide_with_faces(&a, &b, &config(0.05, 1e-3, 1e-3)).unwrap();
    assert_eq!(d.verdict, Verdict::Intersect);
    let face = d.face.clone().unwrap();
    let w = d.witness.as_ref().unwrap();
    for (i, &p) in w.probs().iter().enumerate() {
        assert_eq!(p == 0.0, face.contains(&i), "category {i}: {p}");
    }
    assert_valid_witness(a.counts(), b.counts(), &d, 0.05, 1e-3);
}

#[test]
fn zero_face_point_is_never_a_witness() {
    // Category 0 is observed, so p_0 = 0 gives ρ = 0 for both outcomes and
    // no face collapses it.
    let plan = plan_faces(&cv(&[3, 2, 0, 0]), &cv(&[4, 1, 0, 0])).unwrap();
    assert!(plan.faces.iter().all(|f| !f.collapsed.contains(&0) && !f.collapsed.contains(&1)));
}

#[test]
fn single_category_face() {
    let d = decide_with_faces(&cv(&[4, 0]), &cv(&[4, 0]), &config(0.2, 0.01, 1e-3)).unwrap();
    assert_eq!(d.verdict, Verdict::Intersect);
}

#[test]
fn binary_fixtures() {
    let d = decide_with_faces(&cv(&[1, 1]), &cv(&[1, 1]), &config(0.05, 1e-3, 1e-2)).unwrap();
    assert_eq!(d.verdict, Verdict::Intersect);
    let d = decide_with_faces(&cv(&[20, 0]), &cv(&[0, 20]), &config(0.05, 1e-3, 1e-3)).unwrap();
    assert_eq!(d.verdict, Verdict::Disjoint);
}

#[test]
fn deterministic_across_worker_counts() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..12 {
        let n = rng.random_range(2..=8u32);
        let a = common::random_counts(&mut rng, n, 3);
        let b = common::random_counts(&mut rng, n, 3);
        let alpha = [0.05, 0.1, 0.17, 0.3][rng.random_range(0..4)];
        let mut base = config(alpha, 1e-3, 1e-3);
        base.max_cells = 50_000;
        let runs: Vec<_> = [1usize, 2, 4]
            .iter()
            .map(|&w| {
                let mut c = base.clone();
                c.workers = w;
                decide_with_faces(&cv(&a), &cv(&b), &c).unwrap()
            })
            .collect();
        for r in &runs[1..] {
            assert_eq!(r.verdict, runs[0].verdict);
            assert_eq!(r.witness, runs[0].witness);
            assert_eq!(r.cells_processed, runs[0].cells_processed);
            assert_eq!(r.unresolved_count, runs[0].unresolved_count);
            assert_eq!(r.pruned, runs[0].pruned);
        }
        let again = decide_with_faces(&cv(&a), &cv(&b), &base).unwrap();
        assert_eq!(again.verdict, runs[0].verdict);
        assert_eq!(again.witness, runs[0].witness);
    }
}

#[test]
fn verdicts_are_monotone_in_tau() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..25 {
        let k = rng.random_range(2..=3usize);
        let n = rng.random_range(1..=8u32);
        let a = common::random_counts(&mut rng, n, k);
        let b = common::random_counts(&mut rng, n, k);
        let alpha = [0.05, 0.1, 0.17, 0.3][rng.random_range(0..4)];
        let coarse = decide_with_faces(&cv(&a), &cv(&b), &config(alpha, 0.02, 1e-3)).unwrap();
        let fine = decide_with_faces(&cv(&a), &cv(&b), &config(alpha, 0.005, 1e-3)).unwrap();
        if coarse.verdict != Verdict::Uncertain {
            assert_eq!(fine.verdict, coarse.verdict, "{a:?} {b:?} alpha {alpha}");
        }
    }
}

#[test]
fn disjoint_heavy_sweep_agrees_with_oracle() {
    // Outcomes concentrated on different categories, so DISJOINT is common.
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut disjoint = 0;
    for _ in 0..40 {
        let n = rng.random_range(4..=8u32);
        let k = 3;
        let hot_a = rng.random_range(0..k);
        let hot_b = (hot_a + rng.random_range(1..k)) % k;
        let skew = |hot: usize, rng: &mut ChaCha8Rng| {
            let mut c = vec![0u32; k];
            for _ in 0..n {
                let i = if rng.random::<f64>() < 0.8 { hot } else { rng.random_range(0..k) };
                c[i] += 1;
            }
            c
        };
        let a = skew(hot_a, &mut rng);
        let b = skew(hot_b, &mut rng);
        let alpha = [0.05, 0.1, 0.17, 0.3][rng.random_range(0..4)];
        let d = decide_with_faces(&cv(&a), &cv(&b), &config(alpha, 1e-3, 1e-3)).unwrap();
        let oracle = oracle_max_min_pvalue(&cv(&a), &cv(&b), 300).unwrap();
        match d.verdict {
            // The grid can miss thin ridges near a face, so an INTERSECT is
            // checked through its witness alone.
            Verdict::Intersect => assert_valid_witness(&a, &b, &d, alpha, 1e-3),
            Verdict::Disjoint => {
                disjoint += 1;
                assert!(oracle < alpha, "{a:?} {b:?} {alpha}: oracle {oracle}");
            }
            Verdict::Uncertain => {}
        }
    }
    assert!(disjoint >= 5, "only {disjoint} disjoint instances");
}

#[test]
fn budget_exhaustion_is_uncertain_with_frontier() {
    let mut c = config(0.17, 1e-3, 1e-6);
    c.max_cells = 40;
    c.record_trace = true;
    let d = decide_with_faces(&cv(&[1, 6, 1]), &cv(&[2, 1, 5]), &c).unwrap();
    assert_eq!(d.verdict, Verdict::Uncertain);
    assert!(d.budget_exhausted);
    let trace = d.trace.unwrap();
    assert!(trace.iter().any(|e| e.action == CellAction::Frontier));
    let frontier = trace.iter().filter(|e| e.action == CellAction::Frontier).count() as u64;
    assert_eq!(frontier, d.unresolved_count);
}

#[test]
fn trace_records_parents() {
    let mut c = config(0.17, 1e-3, 1e-3);
    c.record_trace = true;
    let d = decide_with_faces(&cv(&[1, 6, 1]), &cv(&[2, 1, 5]), &c).unwrap();
    let trace = d.trace.unwrap();
    assert_eq!(trace.len() as u64, d.cells_processed);
    assert_eq!(trace.last().unwrap().action, CellAction::Intersect);
    assert!(trace.iter().filter(|e| e.parent.is_none()).count() >= 1);
    for e in &trace {
        assert!(e.min_lower <= e.min_upper);
        assert_eq!(e.vertices.len(), 3);
    }
}

#[test]
fn invalid_inputs() {
    assert!(decide_with_faces(&cv(&[1, 2, 3]), &cv(&[1, 2]), &config(0.1, 1e-3, 1e-3)).is_err());
    assert!(decide_with_faces(&cv(&[1, 2]), &cv(&[2, 2]), &config(0.1, 1e-3, 1e-3)).is_err());
    assert!(decide_with_faces(&cv(&[1, 2]), &cv(&[2, 1]), &config(0.1, 0.2, 1e-3)).is_err());
}
