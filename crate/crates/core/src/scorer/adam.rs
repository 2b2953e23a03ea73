use super::net::{Gradients, Real, ScorerNet};
use super::{ScorerError, TrainConfig};

/// First and second moment estimates, kept in `f64` regardless of the
/// parameter type.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub t: u64,
}

impl AdamState {
    pub fn new<T: Real>(net: &ScorerNet<T>) -> Self {
        let shape: Vec<Vec<f64>> = net.tensors().iter().map(|t| vec![0.0; t.data.len()]).collect();
        Self { m: shape.clone(), v: shape, t: 0 }
    }
}

/// One bias-corrected Adam update.
pub fn adam_step<T: Real>(
    net: &mut ScorerNet<T>,
    grads: &Gradients<T>,
    state: &mut AdamState,
    cfg: &TrainConfig,
) -> Result<(), ScorerError> {
    let tensors = net.tensors_mut();
    if grads.tensors.len() != tensors.len() || state.m.len() != tensors.len() || state.v.len() != tensors.len() {
        return Err(ScorerError::ShapeMismatch("optimizer state does not match network".into()));
    }
    for (k, (p, g)) in tensors.iter().zip(&grads.tensors).enumerate() {
        if p.data.len() != g.data.len() || state.m[k].len() != p.data.len() || state.v[k].len() != p.data.len() {
            return Err(ScorerError::ShapeMismatch(format!("{} gradient or moment length", p.name)));
        }
    }
    state.t += 1;
    let t = i32::try_from(state.t).unwrap_or(i32::MAX);
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    for (k, (p, g)) in tensors.iter_mut().zip(&grads.tensors).enumerate() {
        let (m, v) = (&mut state.m[k], &mut state.v[k]);
        for i in 0..p.data.len() {
            let gi = g.data[i].to_f64().unwrap_or(f64::NAN);
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            let step = cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
            let old = p.data[i].to_f64().unwrap_or(f64::NAN);
            p.data[i] = T::from(old - step).ok_or(ScorerError::NonFinite)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scorer::init_model;

    fn constant_grads(net: &ScorerNet<f64>, f: impl Fn(usize) -> f64) -> Gradients<f64> {
        let mut g = Gradients::zeros(net.n_channels());
        for t in &mut g.tensors {
            for (i, v) in t.data.iter_mut().enumerate() {
                *v = f(i);
            }
        }
        g
    }

    #[test]
    fn first_step_moves_by_lr() {
        let cfg = TrainConfig::default();
        let mut net = init_model::<f64>(2, 0).unwrap();
        let before = net.clone();
        let g = constant_grads(&net, |i| if i % 2 == 0 { 0.3 } else { -2.0 });
        let mut st = AdamState::new(&net);
        adam_step(&mut net, &g, &mut st, &cfg).unwrap();
        assert_eq!(st.t, 1);
        for ((a, b), gt) in before.tensors().iter().zip(net.tensors()).zip(&g.tensors) {
            for i in 0..a.data.len() {
                let gi: f64 = gt.data[i];
                let expect = cfg.learning_rate * gi.signum() / (1.0 + cfg.epsilon / gi.abs());
                let moved = a.data[i] - b.data[i];
                assert!((moved - expect).abs() <= 1e-15 * cfg.learning_rate.max(a.data[i].abs()) * 10.0, "{moved} vs {expect}");
            }
        }
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let cfg = TrainConfig::default();
        let mut net = init_model::<f32>(3, 1).unwrap();
        let before = net.clone();
        let mut st = AdamState::new(&net);
        adam_step(&mut net, &Gradients::zeros(3), &mut st, &cfg).unwrap();
        assert_eq!(net, before);
    }

    #[test]
    fn two_step_trace() {
        let cfg = TrainConfig { learning_rate: 0.01, ..TrainConfig::default() };
        let mut net = ScorerNet::<f64>::zeros(1).unwrap();
        let mut st = AdamState::new(&net);
        let g1 = constant_grads(&net, |i| if i % 2 == 0 { 1.0 } else { -1.0 });
        adam_step(&mut net, &g1, &mut st, &cfg).unwrap();
        // m = 0.1 g, v = 0.001, corrected m = g, v = 1
        let x1 = -0.01 / (1.0 + 1e-8);
        let w = &net.get("conv1.weight").unwrap().data;
        assert!((w[0] - x1).abs() < 1e-17 && (w[1] + x1).abs() < 1e-17);

        adam_step(&mut net, &g1, &mut st, &cfg).unwrap();
        // m = 0.19 g, v = 0.001999, corrected m = g, v = 1
        let w = &net.get("conv1.weight").unwrap().data;
        assert!((w[0] - 2.0 * x1).abs() < 1e-16 && (w[1] + 2.0 * x1).abs() < 1e-16);

        let g2 = constant_grads(&net, |i| if i % 2 == 0 { -1.0 } else { 1.0 });
        let mut net2 = ScorerNet::<f64>::zeros(1).unwrap();
        let mut st2 = AdamState::new(&net2);
        adam_step(&mut net2, &g1, &mut st2, &cfg).unwrap();
        adam_step(&mut net2, &g2, &mut st2, &cfg).unwrap();
        // m = 0.09 - 0.1 = -0.01, corrected m = -0.01 / 0.19 = -1/19
        let step2 = 0.01 * (-1.0 / 19.0) / (1.0 + 1e-8);
        let w = &net2.get("conv1.weight").unwrap().data;
        assert!((w[0] - (x1 - step2)).abs() < 1e-15, "{}", w[0]);
        assert!((w[1] + (x1 - step2)).abs() < 1e-15);
        assert!((st2.m[0][0] + 0.01).abs() < 1e-16);
        assert!((st2.v[0][0] - 0.001999).abs() < 1e-16);
    }

    #[test]
    fn mismatched_state_is_rejected() {
        let cfg = TrainConfig::default();
        let mut net = init_model::<f32>(3, 1).unwrap();
        let mut st = AdamState::new(&init_model::<f32>(4, 1).unwrap());
        assert!(matches!(adam_step(&mut net, &Gradients::zeros(3), &mut st, &cfg), Err(ScorerError::ShapeMismatch(_))));
    }
}
