use pancake_core::design::{find_uniform_design, SearchOptions};
use pancake_core::distributions::{ou_smooth, DiscreteDist1D, Gmm1D};
use pancake_core::hermite::hermite_eval;
use pancake_core::pancakes::{make_instance, Direction, Sampler};
use pancake_core::tensor::{empirical_tensors, multi_indices};

fn instance(d: usize, base: Gmm1D, seed: u64) -> pancake_core::PancakeInstance {
    make_instance(base, d, Direction::Random, seed).unwrap()
}

#[test]
fn component_sampler_matches_covariance_sampler() {
    let n = 100_000;
    let bases = [
        ou_smooth(&DiscreteDist1D::uniform(vec![-1.0, 1.0]).unwrap(), 0.8).unwrap(),
        Gmm1D::new(vec![-1.2, 0.3, 1.5], vec![0.2, 0.5, 0.3], 0.6).unwrap(),
    ];
    for (j, base) in bases.into_iter().enumerate() {
        for d in 2..=4 {
            let inst = instance(d, base.clone(), 40 + j as u64);
            let a = empirical_tensors(inst.sample(n, 1).view(), 8).unwrap();
            let b = empirical_tensors(inst.sample_by_covariance(n, 2).view(), 4).unwrap();
            for order in 1..=4 {
                for idx in multi_indices(d, order) {
                    let mean_a = a[order - 1].get(&idx);
                    let mean_b = b[order - 1].get(&idx);
                    // Monte Carlo band from the empirical second moment of the monomial
                    let doubled: Vec<usize> = idx.iter().chain(&idx).copied().collect();
                    let var = (a[2 * order - 1].get(&doubled) - mean_a * mean_a).max(0.0);
                    let se = (2.0 * var / n as f64).sqrt();
                    assert!(
                        (mean_a - mean_b).abs() <= 5.0 * se + 1e-12,
                        "d={d} base {j} index {idx:?}: {mean_a} vs {mean_b} (se {se})"
                    );
                }
            }
        }
    }
}

#[test]
fn lifted_design_looks_gaussian_along_the_hidden_direction() {
    let design = find_uniform_design(6, 5, &SearchOptions::default())
        .unwrap()
        .dist
        .unwrap();
    let base = ou_smooth(&design, 0.9f64.sqrt()).unwrap();
    let inst = instance(4, base, 3);
    let n = 200_000;
    let x = inst.sample(n, 5);
    let proj: Vec<f64> = x
        .rows()
        .into_iter()
        .map(|r| r.dot(&ndarray::aview1(inst.v())))
        .collect();
    for j in 1..=5 {
        // Var h_j(Z) = 1 under N(0, 1); the lifted law matches it up to order 5
        let mean = proj.iter().map(|&y| hermite_eval(j, y)).sum::<f64>() / n as f64;
        let second = proj.iter().map(|&y| hermite_eval(j, y).powi(2)).sum::<f64>() / n as f64;
        let se = ((second - mean * mean) / n as f64).sqrt();
        assert!(mean.abs() <= 4.5 * se, "E[h_{j}(v.x)] = {mean} (se {se})");
    }
}

#[test]
fn sampling_is_reproducible() {
    let base = Gmm1D::new(vec![-0.5, 0.5], vec![0.5, 0.5], 0.5).unwrap();
    let inst = instance(5, base, 9);
    assert_eq!(inst.sample(3000, 4), inst.sample(3000, 4));
    assert_ne!(inst.sample(3000, 4), inst.sample(3000, 5));
}
