use super::TrainError;
use crate::model::ModelParams;
use crate::Real;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Adam moment estimates for every parameter, in canonical flat order.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<S> {
    pub step: u64,
    pub first: Vec<S>,
    pub second: Vec<S>,
}

impl<S: Real> AdamState<S> {
    pub fn new(param_count: usize) -> Self {
        Self { step: 0, first: vec![S::zero(); param_count], second: vec![S::zero(); param_count] }
    }
}

/// One bias-corrected Adam step with `beta1 = 0.9`, `beta2 = 0.999`, `eps = 1e-8`.
pub fn adam_update<S: Real>(
    params: &mut ModelParams<S>,
    grads: &ModelParams<S>,
    state: &mut AdamState<S>,
    lr: f64,
) -> Result<(), TrainError> {
    let count = params.param_count();
    if grads.param_count() != count || state.first.len() != count || state.second.len() != count {
        return Err(TrainError::ShapeMismatch {
            params: count,
            grads: grads.param_count(),
            moments: state.first.len(),
        });
    }
    state.step += 1;
    let t = state.step as f64;
    let (b1, b2) = (S::of(ADAM_BETA1), S::of(ADAM_BETA2));
    let (c1, c2) = (S::one() - b1, S::one() - b2);
    let correction1 = S::of(1.0 - ADAM_BETA1.powf(t));
    let correction2 = S::of(1.0 - ADAM_BETA2.powf(t));
    let (lr, eps) = (S::of(lr), S::of(ADAM_EPS));

    let mut k = 0;
    for (p, (_, g)) in params.tensors_mut().into_iter().zip(grads.tensors()) {
        for (pv, &gv) in p.iter_mut().zip(g) {
            let m = &mut state.first[k];
            let v = &mut state.second[k];
            *m = b1 * *m + c1 * gv;
            *v = b2 * *v + c2 * gv * gv;
            let m_hat = *m / correction1;
            let v_hat = *v / correction2;
            *pv -= lr * m_hat / (v_hat.sqrt() + eps);
            k += 1;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ArchConfig;

    fn tiny() -> (ArchConfig, ModelParams<f64>) {
        let arch = ArchConfig {
            layer_count: 2,
            frame_count: 3,
            feature_dim: 2,
            model_dim: 4,
            transformer_layers: 1,
            attention_heads: 2,
            head_names: vec!["MOS".into()],
        };
        let p = ModelParams::init(&arch, 1).unwrap();
        (arch, p)
    }

    #[test]
    fn zero_gradients_leave_params_unchanged() {
        let (_, mut p) = tiny();
        let before = p.clone();
        let g = p.zeros_like();
        let mut s = AdamState::new(p.param_count());
        for _ in 0..10 {
            adam_update(&mut p, &g, &mut s, 1e-3).unwrap();
        }
        assert_eq!(p, before);
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let (_, mut p) = tiny();
        let before = p.to_flat();
        let mut g = p.zeros_like();
        g.fill(-0.37);
        g.alpha[0] = 2.5;
        let mut s = AdamState::new(p.param_count());
        adam_update(&mut p, &g, &mut s, 1e-3).unwrap();
        let after = p.to_flat();
        let grads = g.to_flat();
        for ((a, b), gv) in after.iter().zip(&before).zip(&grads) {
            // m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps).
            let expected = -1e-3 * gv.signum() * gv.abs() / (gv.abs() + 1e-8);
            assert!((a - b - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn shape_mismatch() {
        let (_, mut p) = tiny();
        let g = p.zeros_like();
        let mut s = AdamState::new(3);
        assert!(matches!(adam_update(&mut p, &g, &mut s, 1e-3), Err(TrainError::ShapeMismatch { .. })));
    }

    #[test]
    fn quadratic_converges_like_scalar_recursion() {
        // f(p) = sum p^2 over all parameters; every coordinate follows the
        // same 1-D Adam recursion, computed here independently for alpha[0].
        let (_, mut p) = tiny();
        p.fill(0.0);
        p.alpha[0] = 1.0;
        let mut s = AdamState::new(p.param_count());
        let (mut x, mut m, mut v) = (1.0f64, 0.0, 0.0);
        let lr = 0.01;
        let mut trace = vec![];
        for t in 1..=2000 {
            let mut g = p.clone();
            g.tensors_mut().into_iter().flatten().for_each(|x| *x *= 2.0);
            adam_update(&mut p, &g, &mut s, lr).unwrap();

            let gx = 2.0 * x;
            m = ADAM_BETA1 * m + (1.0 - ADAM_BETA1) * gx;
            v = ADAM_BETA2 * v + (1.0 - ADAM_BETA2) * gx * gx;
            let mh = m / (1.0 - ADAM_BETA1.powi(t));
            let vh = v / (1.0 - ADAM_BETA2.powi(t));
            x -= lr * mh / (vh.sqrt() + ADAM_EPS);
            assert!((p.alpha[0] - x).abs() < 1e-12, "step {t}");
            trace.push(p.alpha[0].abs());
        }
        assert!(trace[1999] < 1e-2);
        assert!(trace[..60].windows(2).all(|w| w[1] < w[0]));
        assert_eq!(p.alpha[1], 0.0);
    }
}
