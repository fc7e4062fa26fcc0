mod common;

use common::{brute_force_bisection, cutsize_oracle, dense_clique, random_hg, rng};
use mstpart::hypergraph::{is_feasible, Weight};
use mstpart::operators::{clique_expand, laplacian};
use mstpart::optimizer::{project_rows, FeatureMatrix};
use mstpart::refine::{
    bipartition_candidates, block_strengths, kway_fm, mst_bipartition, pair_blocks, pairwise_improve,
    repair_feasibility, split_objective, BipartitionParams,
};
use mstpart::synthetic::two_cliques;
use mstpart::{BalanceSpec, FmParams, Hypergraph, PairwiseParams, Partition};
use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn random_features(r: &mut ChaCha8Rng, n: usize) -> FeatureMatrix {
    project_rows(Array2::from_shape_simple_fn((n, 2), || r.random_range(-1.0..1.0)))
}

/// Round-robin over vertices in random order; feasible for unit weights.
fn balanced_assignment(r: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        order.swap(i, r.random_range(0..=i));
    }
    let mut a = vec![0; n];
    for (i, &v) in order.iter().enumerate() {
        a[v] = i % k;
    }
    a
}

#[test]
fn strengths_and_greedy_pairing() {
    let h = Hypergraph::new(vec![1; 3], vec![(10, vec![0, 1]), (1, vec![0, 2]), (2, vec![1, 2])]).unwrap();
    let p = Partition::new(&h, 3, vec![0, 1, 2]).unwrap();
    let plan = pair_blocks(&h, &p);
    assert_eq!(plan.pairs, vec![(0, 1)]);
    assert_eq!(plan.leftover, Some(2));

    let mut r = rng(1);
    for _ in 0..50 {
        let k = r.random_range(2..=5);
        let h = random_hg(&mut r, 20, 30, 5, 4);
        let a: Vec<usize> = (0..20).map(|_| r.random_range(0..k)).collect();
        let p = Partition::new(&h, k, a.clone()).unwrap();
        let s = block_strengths(&h, &p);
        for i in 0..k {
            for j in 0..k {
                if i == j {
                    continue;
                }
                let expected: Weight = h
                    .edges()
                    .filter(|(_, pins)| pins.iter().any(|&v| a[v] == i) && pins.iter().any(|&v| a[v] == j))
                    .map(|(w, _)| w)
                    .sum();
                assert_eq!(s[i][j], expected);
            }
        }
        let plan = pair_blocks(&h, &p);
        assert_eq!(plan.pairs.len(), k / 2);
        assert_eq!(plan.leftover.is_some(), k % 2 == 1);
        let mut used: Vec<usize> = plan.pairs.iter().flat_map(|&(a, b)| [a, b]).chain(plan.leftover).collect();
        used.sort();
        assert_eq!(used, (0..k).collect::<Vec<_>>());
    }
}

#[test]
fn bipartition_is_lower_envelope_and_bounded_by_brute_force() {
    let mut r = rng(2);
    for _ in 0..100 {
        let n = r.random_range(2..=12);
        let h = random_hg(&mut r, n, 2 * n, 4, 3);
        let lap = laplacian(&clique_expand(&h));
        let x = random_features(&mut r, n);
        let total = h.total_vertex_weight();
        let caps = (total * 3 / 4 + 1, total * 3 / 4 + 1);
        let params = BipartitionParams::default();
        let best = mst_bipartition(&x, h.vertex_weights(), caps, &lap, &params);
        let cands = bipartition_candidates(&x, h.vertex_weights(), caps, &lap, &params);
        let envelope = cands.iter().filter(|c| c.feasible).map(|c| c.objective).fold(f64::INFINITY, f64::min);
        if best.feasible {
            assert_eq!(best.objective, envelope);
        } else {
            assert!(cands.iter().all(|c| !c.feasible));
        }
        for c in &cands {
            assert!((c.objective - split_objective(&lap, &c.labels)).abs() < 1e-12);
        }

        let mut brute = f64::INFINITY;
        for mask in 0u32..(1 << n) {
            let y: Vec<i8> = (0..n).map(|v| if (mask >> v) & 1 == 1 { 1 } else { -1 }).collect();
            let plus: Weight = (0..n).filter(|&v| y[v] > 0).map(|v| h.vertex_weight(v)).sum();
            if plus <= caps.0 && total - plus <= caps.1 {
                brute = brute.min(split_objective(&lap, &y));
            }
        }
        if best.feasible {
            assert!(best.objective >= brute - 1e-12);
        }
    }
}

#[test]
fn two_blobs_split_along_the_gap() {
    let h = two_cliques(6);
    let n = h.num_vertices();
    let mut r = rng(3);
    let mut x = Array2::zeros((n, 2));
    for v in 0..n {
        let angle = if v < 6 { 0.0 } else { std::f64::consts::FRAC_PI_2 } + r.random_range(-0.1..0.1);
        x[[v, 0]] = angle.cos();
        x[[v, 1]] = angle.sin();
    }
    let x = project_rows(x);
    let lap = laplacian(&clique_expand(&h));
    let res = mst_bipartition(&x, h.vertex_weights(), (7, 7), &lap, &BipartitionParams::default());
    assert!(res.feasible);
    assert!((0..6).all(|v| res.labels[v] == res.labels[0]));
    assert!((6..12).all(|v| res.labels[v] == -res.labels[0]));
    let a = dense_clique(&h);
    let cut: f64 = (0..6).flat_map(|i| (6..12).map(move |j| (i, j))).map(|(i, j)| a[[i, j]]).sum();
    assert!((res.objective - cut).abs() < 1e-12);
}

#[test]
fn identical_features_are_flagged() {
    let n = 10;
    let h = two_cliques(5);
    let x = project_rows(Array2::from_elem((n, 2), 1.0));
    let lap = laplacian(&clique_expand(&h));
    let res = mst_bipartition(&x, h.vertex_weights(), (9, 9), &lap, &BipartitionParams::default());
    assert!(!res.feasible);
    assert!(res.labels.iter().all(|&l| l == res.labels[0]));
}

#[test]
fn fm_sweep_is_monotone_and_feasible() {
    let mut r = rng(4);
    let fm = FmParams::default();
    for _ in 0..100 {
        let n = r.random_range(4..60);
        let k = r.random_range(2..=4);
        let h = random_hg(&mut r, n, 2 * n, 5, 1);
        let spec = BalanceSpec::for_hypergraph(&h, k, 0.1).unwrap();
        let p = Partition::new(&h, k, balanced_assignment(&mut r, n, k)).unwrap();
        assert!(is_feasible(&p, &spec));
        let before = p.cutsize();
        let out = kway_fm(&h, p, &spec, &fm);
        assert!(is_feasible(&out, &spec));
        assert!(out.cutsize() <= before);
        assert_eq!(out.cutsize(), cutsize_oracle(&h, out.assignment()));
        let again = kway_fm(&h, out.clone(), &spec, &fm);
        assert_eq!(again.cutsize(), out.cutsize());
    }
}

#[test]
fn fm_moves_a_single_misplaced_vertex() {
    // Vertex 0 sits in block 1 but all its nets lead to block 0.
    let h = Hypergraph::new(
        vec![1; 6],
        vec![(3, vec![0, 1]), (3, vec![0, 2]), (1, vec![1, 2]), (1, vec![3, 4]), (1, vec![4, 5])],
    )
    .unwrap();
    let spec = BalanceSpec::for_hypergraph(&h, 2, 0.5).unwrap();
    let p = Partition::new(&h, 2, vec![1, 0, 0, 1, 1, 1]).unwrap();
    let gain = p.gain(&h, 0, 0);
    let mut moved = p.assignment().to_vec();
    moved[0] = 0;
    assert_eq!(gain, cutsize_oracle(&h, p.assignment()) as i64 - cutsize_oracle(&h, &moved) as i64);
    let out = kway_fm(&h, p.clone(), &spec, &FmParams::default());
    assert_eq!(out.block_of(0), 0);
    assert_eq!(out.cutsize(), 0);
    assert_eq!(p.cutsize() as i64 - out.cutsize() as i64, gain);
}

#[test]
fn repair_moves_the_cheapest_vertex() {
    let mut r = rng(5);
    for _ in 0..100 {
        let h = random_hg(&mut r, 6, 8, 3, 1);
        let h = Hypergraph::new(vec![1; 6], h.edges().map(|(w, p)| (w, p.to_vec())).collect::<Vec<_>>()).unwrap();
        let spec = BalanceSpec::for_hypergraph(&h, 2, 0.04).unwrap();
        assert_eq!(spec.cap(0), 3);
        let a = balanced_assignment(&mut r, 6, 2);
        let mut a: Vec<usize> = a;
        let extra = (0..6).find(|&v| a[v] == 1).unwrap();
        a[extra] = 0;

        let mut expected = None;
        for v in (0..6).filter(|&v| a[v] == 0) {
            let mut b = a.clone();
            b[v] = 1;
            let c = cutsize_oracle(&h, &b);
            if expected.as_ref().is_none_or(|(bc, _)| c < *bc) {
                expected = Some((c, b));
            }
        }
        let (ok_cut, ok_assign) = expected.unwrap();
        let (out, ok) = repair_feasibility(&h, Partition::new(&h, 2, a).unwrap(), &spec);
        assert!(ok);
        assert_eq!(out.assignment(), &ok_assign[..]);
        assert_eq!(out.cutsize(), ok_cut);
    }
}

#[test]
fn repair_success_implies_feasible() {
    let mut r = rng(6);
    for _ in 0..200 {
        let n = r.random_range(2..50);
        let k = r.random_range(2..=4);
        let h = random_hg(&mut r, n, n, 4, 6);
        let spec = BalanceSpec::for_hypergraph(&h, k, 0.05).unwrap();
        let a: Vec<usize> = (0..n).map(|_| r.random_range(0..k.min(2))).collect();
        let p = Partition::new(&h, k, a).unwrap();
        let was_feasible = is_feasible(&p, &spec);
        let input = p.assignment().to_vec();
        let (out, ok) = repair_feasibility(&h, p, &spec);
        assert_eq!(ok, is_feasible(&out, &spec));
        if was_feasible {
            assert_eq!(out.assignment(), &input[..]);
        }
    }
    let h = Hypergraph::new(vec![10, 1, 1, 1], vec![(1, vec![0, 1])]).unwrap();
    let spec = BalanceSpec::for_hypergraph(&h, 2, 0.04).unwrap();
    let (_, ok) = repair_feasibility(&h, Partition::new(&h, 2, vec![0, 1, 1, 1]).unwrap(), &spec);
    assert!(!ok);
}

fn quick_pairwise() -> PairwiseParams {
    let mut params = PairwiseParams::default();
    params.apg.max_iters = 500;
    params
}

#[test]
fn pairwise_never_raises_cutsize() {
    let mut r = rng(7);
    let params = quick_pairwise();
    for _ in 0..30 {
        let n = r.random_range(4..40);
        let k = r.random_range(2..=4);
        let h = random_hg(&mut r, n, 2 * n, 4, 1);
        let spec = BalanceSpec::for_hypergraph(&h, k, 0.1).unwrap();
        let p = Partition::new(&h, k, balanced_assignment(&mut r, n, k)).unwrap();
        let before = p.cutsize();
        let out = pairwise_improve(&h, p, &spec, &params);
        assert!(out.cutsize() <= before);
        assert!(is_feasible(&out, &spec));
        assert_eq!(out.cutsize(), cutsize_oracle(&h, out.assignment()));
    }
}

#[test]
fn pairwise_fixes_swapped_vertices() {
    let h = two_cliques(5);
    let spec = BalanceSpec::for_hypergraph(&h, 2, 0.04).unwrap();
    let mut a: Vec<usize> = (0..10).map(|v| usize::from(v >= 5)).collect();
    a.swap(0, 9);
    let p = Partition::new(&h, 2, a).unwrap();
    let before = p.cutsize();
    let out = pairwise_improve(&h, p, &spec, &PairwiseParams::default());
    let optimum = brute_force_bisection(&h, spec.cap(0)).unwrap();
    assert!(out.cutsize() < before);
    assert!(out.cutsize() >= optimum);
    assert_eq!(out.cutsize(), optimum);

    let unchanged = pairwise_improve(&h, out.clone(), &spec, &PairwiseParams::default());
    assert_eq!(unchanged.assignment(), out.assignment());
}

#[test]
fn pairwise_leaves_the_odd_block_alone() {
    let mut r = rng(8);
    let mut params = quick_pairwise();
    params.max_rounds = 1;
    for _ in 0..10 {
        let h = random_hg(&mut r, 30, 60, 4, 1);
        let spec = BalanceSpec::for_hypergraph(&h, 3, 0.1).unwrap();
        let p = Partition::new(&h, 3, balanced_assignment(&mut r, 30, 3)).unwrap();
        let leftover = pair_blocks(&h, &p).leftover.unwrap();
        let members = p.members(leftover);
        let out = pairwise_improve(&h, p, &spec, &params);
        assert_eq!(out.members(leftover), members);
    }
}
