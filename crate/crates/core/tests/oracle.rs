//! The exact steady-state solver and the simulator against a dense
//! transition matrix assembled directly from the model definition.

use nalgebra::{DMatrix, DVector};
use pbn_steady::model::{
    exact_steady_state, random_pbn, transition_step, NetworkState, PbnModel, RandomPbnSpec,
};
use pbn_steady::sim::{step, stream_rng, MetaProperty, ChainSet, WorkerPool};
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn bit(s: usize, i: usize) -> usize {
    (s >> i) & 1
}

/// Row-stochastic matrix: perturbation vectors enumerated explicitly, then
/// every realisation applied synchronously.
fn dense_matrix(model: &PbnModel) -> DMatrix<f64> {
    let n = model.n;
    let size = 1usize << n;
    let p = model.perturbation;
    let mut m = DMatrix::zeros(size, size);
    for s in 0..size {
        for gamma in 1..size {
            let k = gamma.count_ones() as i32;
            m[(s, s ^ gamma)] += p.powi(k) * (1.0 - p).powi(n as i32 - k);
        }
        let quiet = (1.0 - p).powi(n as i32);
        let mut choice = vec![0usize; n];
        loop {
            let mut prob = quiet;
            let mut next = 0usize;
            for i in 0..n {
                let f = &model.functions[i][choice[i]];
                prob *= f.probability;
                let mut idx = 0;
                for &q in &f.parents {
                    idx = idx * 2 + bit(s, q);
                }
                if f.table.get(idx) {
                    next |= 1 << i;
                }
            }
            m[(s, next)] += prob;
            // odometer over function choices
            let mut i = 0;
            while i < n {
                choice[i] += 1;
                if choice[i] < model.functions[i].len() {
                    break;
                }
                choice[i] = 0;
                i += 1;
            }
            if i == n {
                break;
            }
        }
    }
    m
}

fn dense_stationary(m: &DMatrix<f64>) -> DVector<f64> {
    let size = m.nrows();
    let mut a = m.transpose() - DMatrix::identity(size, size);
    for j in 0..size {
        a[(size - 1, j)] = 1.0;
    }
    let mut b = DVector::zeros(size);
    b[size - 1] = 1.0;
    a.lu().solve(&b).expect("irreducible chain")
}

fn models() -> Vec<PbnModel> {
    let mut out = Vec::new();
    for (k, &(n, p)) in [(3, 0.1), (4, 0.01), (5, 0.05), (6, 0.2), (7, 0.03)].iter().enumerate() {
        let spec = RandomPbnSpec::new(n, (1, 3), (1, n.min(3))).with_perturbation(p);
        out.push(random_pbn(&spec, 40 + k as u64).unwrap());
    }
    out
}

#[test]
fn rows_are_stochastic() {
    for model in models() {
        let m = dense_matrix(&model);
        for r in 0..m.nrows() {
            let s: f64 = m.row(r).iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn exact_solver_matches_dense_solve() {
    for model in models() {
        let dense = dense_stationary(&dense_matrix(&model));
        let exact = exact_steady_state(&model).unwrap();
        for (s, &want) in dense.iter().enumerate() {
            let got = exact.probabilities[s];
            assert!((got - want).abs() < 1e-9, "n={} state {s}: {got} vs {want}", model.n);
        }
    }
}

#[test]
fn transition_step_is_row_vector_product() {
    for model in models() {
        let m = dense_matrix(&model);
        let size = m.nrows();
        let pi: Vec<f64> = (0..size).map(|i| ((i * 7919) % 13 + 1) as f64).collect();
        let total: f64 = pi.iter().sum();
        let pi: Vec<f64> = pi.iter().map(|x| x / total).collect();
        let got = transition_step(&model, &pi);
        let want = m.transpose() * DVector::from_vec(pi);
        for s in 0..size {
            assert!((got[s] - want[s]).abs() < 1e-14);
        }
    }
}

#[test]
fn one_step_distribution_chi_square() {
    for (k, model) in models().into_iter().enumerate() {
        let m = dense_matrix(&model);
        let size = m.nrows();
        let from = (5 * k + 1) % size;
        let start = NetworkState::from_index(model.n, from as u64);
        let draws = 200_000usize;
        let mut counts = vec![0u64; size];
        let mut rng = stream_rng(7, k as u64);
        for _ in 0..draws {
            counts[step(&model, &start, &mut rng).to_index() as usize] += 1;
        }
        // pool cells with small expectation into one
        let (mut stat, mut cells) = (0.0, 0usize);
        let (mut pooled_obs, mut pooled_exp) = (0.0, 0.0);
        for s in 0..size {
            let e = m[(from, s)] * draws as f64;
            let o = counts[s] as f64;
            if e < 5.0 {
                pooled_obs += o;
                pooled_exp += e;
            } else {
                stat += (o - e) * (o - e) / e;
                cells += 1;
            }
        }
        if pooled_exp > 0.0 {
            stat += (pooled_obs - pooled_exp).powi(2) / pooled_exp.max(1e-9);
            cells += 1;
        }
        let df = (cells - 1) as f64;
        let p_value = 1.0 - ChiSquared::new(df).unwrap().cdf(stat);
        assert!(p_value > 1e-4, "n={} chi2={stat:.1} df={df} p={p_value:e}", model.n);
    }
}

#[test]
fn long_run_frequency_matches_oracle() {
    let spec = RandomPbnSpec::new(6, (1, 3), (1, 3)).with_perturbation(0.05);
    let model = random_pbn(&spec, 5).unwrap();
    let exact = exact_steady_state(&model).unwrap();
    let pool = WorkerPool::new(2);
    for node in 0..3 {
        let prop = MetaProperty::new("x", &[(node, true)]);
        let pi = exact.mass(|s| prop.holds(s));
        let mut set = ChainSet::new(&model, vec![prop], 4, 3, &Default::default());
        let len = 2_000_000;
        set.extend_to(&model, len, &pool);
        let mut means = Vec::new();
        for c in set.chains() {
            c.history(0).block_means(0..len, 20_000, &mut means);
        }
        let k = means.len() as f64;
        let mean = means.iter().sum::<f64>() / k;
        let var = means.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0);
        let se = (var / k).sqrt();
        assert!((mean - pi).abs() < 4.5 * se, "node {node}: {mean} vs {pi} (se {se})");
    }
}
