mod common;

use common::{random_stack, rng, tiny_arch};
use rand::Rng;
use sqpredict::features::FeatureStack;
use sqpredict::model::{backward, forward, forward_with_cache, gradients, ArchConfig, ModelParams, ParamGroup};
use sqpredict::objectives::mse_loss;

struct Case {
    arch: ArchConfig,
    params: ModelParams<f64>,
    stacks: Vec<FeatureStack<f64>>,
    targets: Vec<Vec<f64>>,
}

fn case(seed: u64, heads: &[&str]) -> Case {
    let arch = tiny_arch(heads);
    let mut params = ModelParams::init(&arch, seed).unwrap();
    let mut r = rng(seed ^ 0x5eed);
    // Move away from the initial point so norms and biases carry non-trivial values.
    let flat: Vec<f64> = params.to_flat().iter().map(|v| v + r.random_range(-0.3..0.3)).collect();
    params.copy_from_flat(&flat).unwrap();
    let stacks = (0..3).map(|_| random_stack(arch.stack_dims(), &mut r)).collect();
    let targets = (0..3).map(|_| (0..heads.len()).map(|_| r.random_range(0.2..1.0)).collect()).collect();
    Case { arch, params, stacks, targets }
}

fn loss(c: &Case, params: &ModelParams<f64>) -> f64 {
    let preds: Vec<Vec<f64>> = c.stacks.iter().map(|s| forward(s, params, &c.arch).unwrap().scores).collect();
    mse_loss(&preds, &c.targets).unwrap().loss
}

fn analytic(c: &Case) -> ModelParams<f64> {
    let preds: Vec<Vec<f64>> = c.stacks.iter().map(|s| forward(s, &c.params, &c.arch).unwrap().scores).collect();
    let out = mse_loss(&preds, &c.targets).unwrap();
    let mut grads = c.params.zeros_like();
    for (s, g) in c.stacks.iter().zip(&out.grad) {
        let cache = forward_with_cache(s, &c.params, &c.arch).unwrap();
        backward(s, &c.params, &c.arch, &cache, g, &mut grads).unwrap();
    }
    grads
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-7)
}

/// Worst relative error per parameter group against central differences.
fn check(c: &Case) -> Vec<(ParamGroup, f64, usize)> {
    let h = 1e-5;
    let grads = analytic(c);
    let base = c.params.to_flat();
    let mut probe = c.params.clone();
    let mut worst: Vec<(ParamGroup, f64, usize)> = ParamGroup::ALL.iter().map(|&g| (g, 0.0, 0)).collect();
    let mut k = 0;
    for (name, g) in grads.tensors() {
        let group = ParamGroup::of(&name);
        for &gv in g {
            let mut x = base.clone();
            x[k] = base[k] + h;
            probe.copy_from_flat(&x).unwrap();
            let up = loss(c, &probe);
            x[k] = base[k] - h;
            probe.copy_from_flat(&x).unwrap();
            let down = loss(c, &probe);
            let fd = (up - down) / (2.0 * h);
            let slot = worst.iter_mut().find(|w| w.0 == group).unwrap();
            slot.1 = slot.1.max(rel_err(gv, fd));
            slot.2 += 1;
            k += 1;
        }
    }
    worst
}

#[test]
fn every_group_matches_finite_differences() {
    for seed in 0..5 {
        for (group, err, count) in check(&case(seed, &["MOS"])) {
            assert!(count > 0, "group {} has no parameters", group.name());
            assert!(err < 1e-4, "seed {seed}: {} max relative error {err:e}", group.name());
        }
    }
}

#[test]
fn multi_head_gradients_match_finite_differences() {
    for seed in 10..12 {
        for (group, err, _) in check(&case(seed, &["MOS", "NOI", "COL"])) {
            assert!(err < 1e-4, "seed {seed}: {} max relative error {err:e}", group.name());
        }
    }
}

#[test]
fn zero_upstream_gives_zero_gradients() {
    let c = case(3, &["MOS", "NOI"]);
    let g = gradients(&c.stacks[0], &c.params, &c.arch, &[0.0, 0.0]).unwrap();
    assert!(g.to_flat().iter().all(|&v| v == 0.0));
}

#[test]
fn duplicated_example_doubles_gradient() {
    let c = case(4, &["MOS"]);
    let once = gradients(&c.stacks[1], &c.params, &c.arch, &[0.7]).unwrap();
    let cache = forward_with_cache(&c.stacks[1], &c.params, &c.arch).unwrap();
    let mut twice = c.params.zeros_like();
    backward(&c.stacks[1], &c.params, &c.arch, &cache, &[0.7], &mut twice).unwrap();
    backward(&c.stacks[1], &c.params, &c.arch, &cache, &[0.7], &mut twice).unwrap();
    for (a, b) in once.to_flat().iter().zip(twice.to_flat()) {
        assert!((2.0 * a - b).abs() <= 1e-15 * b.abs().max(1.0));
    }
}
