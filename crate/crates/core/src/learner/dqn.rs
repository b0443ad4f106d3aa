use rand::Rng;

use super::adam::Adam;
use super::network::{argmax, Gradients, QNetwork};
use super::replay::Batch;
use crate::error::{Error, Result};
use crate::world::Action;

/// Epsilon-greedy choice over the network's action values.
pub fn select_action(net: &QNetwork, x: &[f64], epsilon: f64, rng: &mut impl Rng) -> Result<usize> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::Argument(format!("epsilon {epsilon} outside [0, 1]")));
    }
    if rng.gen::<f64>() < epsilon {
        return Ok(rng.gen_range(0..Action::COUNT));
    }
    Ok(argmax(&net.forward(x)?))
}

/// Hard copy of the policy parameters into the target network.
pub fn sync_target(policy: &QNetwork, target: &mut QNetwork) {
    target.copy_from(policy);
}

/// TD errors for every (transition, agent) row, in batch row order.
pub fn td_errors(policy: &QNetwork, target: &QNetwork, batch: &Batch, gamma: f64) -> Result<Vec<f64>> {
    let (_, q, _) = forward_td(policy, target, batch, gamma)?;
    Ok(q)
}

fn forward_td(
    policy: &QNetwork,
    target: &QNetwork,
    batch: &Batch,
    gamma: f64,
) -> Result<(super::network::ForwardCache, Vec<f64>, usize)> {
    if batch.size == 0 {
        return Err(Error::Argument("empty batch".into()));
    }
    let rows = batch.rows();
    let n_out = policy.output_dim();
    let next_q = target.forward_batch(&batch.next_states, rows)?;
    let cache = policy.forward_cached(&batch.states, rows)?;
    let q = cache.output();
    let mut delta = Vec::with_capacity(rows);
    for r in 0..rows {
        let a = batch.actions[r];
        if a >= n_out {
            return Err(Error::Argument(format!("action {a} out of range")));
        }
        let not_done = if batch.terminal[r / 2] { 0.0 } else { 1.0 };
        let best = next_q[r * n_out..(r + 1) * n_out].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let y = batch.rewards[r] + gamma * not_done * best;
        delta.push(y - q[r * n_out + a]);
    }
    Ok((cache, delta, n_out))
}

/// Loss `mean_b (d0^2 + d1^2)` and its unclipped gradient w.r.t. the policy.
pub fn td_loss_and_grad(policy: &QNetwork, target: &QNetwork, batch: &Batch, gamma: f64) -> Result<(f64, Gradients)> {
    let (cache, delta, n_out) = forward_td(policy, target, batch, gamma)?;
    let b = batch.size as f64;
    let loss = delta.iter().map(|d| d * d).sum::<f64>() / b;
    let mut d_out = vec![0.0; delta.len() * n_out];
    for (r, d) in delta.iter().enumerate() {
        d_out[r * n_out + batch.actions[r]] = -2.0 * d / b;
    }
    Ok((loss, policy.backward(&cache, &d_out)))
}

/// One clipped Adam step on the TD loss; returns the pre-step loss.
pub fn td_update(policy: &mut QNetwork, target: &QNetwork, batch: &Batch, gamma: f64, opt: &mut Adam) -> Result<f64> {
    let (loss, mut grads) = td_loss_and_grad(policy, target, batch, gamma)?;
    grads.clip_norm(1.0);
    opt.apply(policy, &grads);
    Ok(loss)
}
