mod common;

use common::rng;
use proptest::prelude::*;
use rand::Rng;
use sqpredict::objectives::{
    bias_aware_loss, bias_aware_weights, correlation_matrix, mse_loss, mse_metric, spearman, DatasetSizes,
    ObjectiveError,
};

/// Rank of each element: one plus the number of smaller elements, plus half
/// the number of other equal elements.
fn rank_by_counting(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|&v| {
            let below = x.iter().filter(|&&u| u < v).count() as f64;
            let equal = x.iter().filter(|&&u| u == v).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect()
}

fn pearson_by_definition(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let vy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    cov / (vx * vy).sqrt()
}

fn spearman_oracle(x: &[f64], y: &[f64]) -> f64 {
    pearson_by_definition(&rank_by_counting(x), &rank_by_counting(y))
}

#[test]
fn spearman_matches_rank_oracle_with_ties() {
    let mut r = rng(42);
    let mut checked = 0;
    while checked < 1000 {
        let n = r.random_range(2..60);
        // Small integer ranges force plenty of ties.
        let levels = r.random_range(2..8);
        let x: Vec<f64> = (0..n).map(|_| r.random_range(0..levels) as f64).collect();
        let y: Vec<f64> = (0..n).map(|_| r.random_range(0..levels) as f64 * 0.5).collect();
        let Ok(got) = spearman(&x, &y) else { continue };
        assert!((got - spearman_oracle(&x, &y)).abs() <= 1e-12);
        checked += 1;
    }
}

#[test]
fn hand_ranked_example() {
    // Ranks (1, 2.5, 2.5, 4) against (1, 3, 2, 4): covariance 4.5, variances 4.5 and 5.
    let r = spearman(&[1.0, 2.0, 2.0, 3.0], &[1.0, 3.0, 2.0, 4.0]).unwrap();
    assert!((r - 4.5 / (4.5f64 * 5.0).sqrt()).abs() < 1e-15);
}

#[test]
fn monotone_cases_are_exact() {
    let mut r = rng(3);
    for _ in 0..200 {
        let n = r.random_range(2..100);
        let mut x: Vec<f64> = (0..n).map(|_| r.random_range(-5.0..5.0)).collect();
        x.sort_by(f64::total_cmp);
        x.dedup();
        if x.len() < 2 {
            continue;
        }
        let up: Vec<f64> = x.iter().map(|v| v.exp()).collect();
        let down: Vec<f64> = x.iter().map(|v| -v * v * v).collect();
        assert_eq!(spearman(&x, &up).unwrap(), 1.0);
        assert_eq!(spearman(&x, &down).unwrap(), -1.0);
    }
}

#[test]
fn constant_and_mismatched_inputs_fail() {
    assert!(matches!(spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), Err(ObjectiveError::UndefinedCorrelation(_))));
    assert!(spearman(&[1.0, 2.0], &[1.0, 2.0, 3.0]).is_err());
    assert!(spearman(&[1.0], &[1.0]).is_err());
}

proptest! {
    #[test]
    fn spearman_symmetric_bounded_and_rank_invariant(
        pairs in prop::collection::vec((-100.0..100.0f64, -100.0..100.0f64), 3..40)
    ) {
        let (x, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        if let Ok(r) = spearman(&x, &y) {
            prop_assert!((-1.0..=1.0).contains(&r));
            prop_assert_eq!(r, spearman(&y, &x).unwrap());
            let warped: Vec<f64> = x.iter().map(|v| (v / 10.0).sinh() + 3.0 * v).collect();
            prop_assert!((spearman(&warped, &y).unwrap() - r).abs() <= 1e-12);
        }
    }
}

#[test]
fn mse_loss_matches_loop_oracle() {
    let mut r = rng(5);
    for _ in 0..50 {
        let n = r.random_range(1..20);
        let heads = r.random_range(1..6);
        let preds: Vec<Vec<f64>> = (0..n).map(|_| (0..heads).map(|_| r.random_range(0.0..1.0)).collect()).collect();
        let targets: Vec<Vec<f64>> = (0..n).map(|_| (0..heads).map(|_| r.random_range(0.2..1.0)).collect()).collect();
        let out = mse_loss(&preds, &targets).unwrap();
        let mut sum = 0.0;
        for i in 0..n {
            for h in 0..heads {
                sum += (preds[i][h] - targets[i][h]).powi(2);
            }
        }
        let count = (n * heads) as f64;
        assert!((out.loss - sum / count).abs() <= 1e-12);
        for i in 0..n {
            for h in 0..heads {
                assert!((out.grad[i][h] - 2.0 * (preds[i][h] - targets[i][h]) / count).abs() <= 1e-12);
            }
        }
    }
    assert!((mse_loss(&[vec![0.6f64]], &[vec![0.2]]).unwrap().loss - 0.16).abs() < 1e-15);
    assert!(mse_loss::<f64>(&[], &[]).is_err());
}

#[test]
fn bias_aware_gradients_match_finite_differences() {
    let sizes = DatasetSizes::new([("A".to_string(), 40), ("B".to_string(), 10), ("C".to_string(), 250)].into()).unwrap();
    let tags = ["A", "B", "C", "B", "A"];
    let mut r = rng(9);
    let preds: Vec<Vec<f64>> = (0..5).map(|_| (0..2).map(|_| r.random_range(0.0..1.0)).collect()).collect();
    let targets: Vec<Vec<f64>> = (0..5).map(|_| (0..2).map(|_| r.random_range(0.2..1.0)).collect()).collect();
    let out = bias_aware_loss(&preds, &targets, &tags, &sizes).unwrap();
    let h = 1e-5;
    for i in 0..5 {
        for k in 0..2 {
            let mut p = preds.clone();
            p[i][k] += h;
            let up = bias_aware_loss(&p, &targets, &tags, &sizes).unwrap().loss;
            p[i][k] -= 2.0 * h;
            let down = bias_aware_loss(&p, &targets, &tags, &sizes).unwrap().loss;
            let fd = (up - down) / (2.0 * h);
            assert!((fd - out.grad[i][k]).abs() <= 1e-4 * fd.abs().max(1e-7));
        }
    }
}

#[test]
fn bias_aware_reduces_to_mse_for_one_dataset() {
    let sizes = DatasetSizes::new([("ONLY".to_string(), 123)].into()).unwrap();
    let mut r = rng(11);
    for _ in 0..20 {
        let n = r.random_range(1..30);
        let preds: Vec<Vec<f64>> = (0..n).map(|_| vec![r.random_range(0.0..1.0)]).collect();
        let targets: Vec<Vec<f64>> = (0..n).map(|_| vec![r.random_range(0.2..1.0)]).collect();
        let tags = vec!["ONLY"; n];
        let a = bias_aware_loss(&preds, &targets, &tags, &sizes).unwrap();
        let b = mse_loss(&preds, &targets).unwrap();
        assert!((a.loss - b.loss).abs() <= 1e-15);
        for (x, y) in a.grad.iter().flatten().zip(b.grad.iter().flatten()) {
            assert!((x - y).abs() <= 1e-15);
        }
    }
    let unknown = bias_aware_loss(&[vec![0.5]], &[vec![0.5]], &["OTHER"], &sizes);
    assert!(matches!(unknown, Err(ObjectiveError::UnknownTag(_))));
}

#[test]
fn one_to_three_sizes_give_three_to_one_weights() {
    let sizes = DatasetSizes::new([("SMALL".to_string(), 100), ("LARGE".to_string(), 300)].into()).unwrap();
    let w = bias_aware_weights::<f64>(&["SMALL", "LARGE"], &sizes).unwrap();
    assert!((w[0] / w[1] - 3.0).abs() <= 1e-15);
}

#[test]
fn metric_and_matrix() {
    assert_eq!(mse_metric(&[3.0], &[4.0]).unwrap(), 1.0);
    assert_eq!(mse_metric(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
    assert!(mse_metric(&[], &[]).is_err());

    let mut r = rng(13);
    let cols: Vec<(String, Vec<f64>)> = (0..4)
        .map(|k| (format!("c{k}"), (0..1000).map(|_| r.random_range(0.0..1.0)).collect()))
        .collect();
    let m = correlation_matrix(&cols).unwrap();
    for i in 0..4 {
        assert_eq!(m.values[i][i], 1.0);
        for j in 0..4 {
            assert_eq!(m.values[i][j], spearman(&cols[i].1, &cols[j].1).unwrap());
            assert_eq!(m.values[i][j], m.values[j][i]);
            assert!(m.values[i][j].abs() <= 1.0);
        }
    }
    let bad = vec![("a".to_string(), vec![1.0, 2.0]), ("b".to_string(), vec![1.0, 2.0, 3.0])];
    assert!(correlation_matrix(&bad).is_err());
}
