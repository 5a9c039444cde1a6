//! Generalized advantage estimation.

use crate::error::{Error, Result};

/// Advantages and returns for a time-contiguous rollout. `dones[t]` marks
/// that the episode ended after step `t`, so `V(s_{t+1})` is not used.
/// `last_value` bootstraps the state following the final step.
pub fn gae_advantages(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    last_value: f64,
    gamma: f64,
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = rewards.len();
    if values.len() != n || dones.len() != n {
        return Err(Error::Shape(format!(
            "{n} rewards, {} values, {} done flags",
            values.len(),
            dones.len()
        )));
    }
    let mut advantages = vec![0.0; n];
    let mut running = 0.0;
    for t in (0..n).rev() {
        let (next_value, carry) = if dones[t] {
            (0.0, 0.0)
        } else if t + 1 < n {
            (values[t + 1], 1.0)
        } else {
            (last_value, 1.0)
        };
        let delta = rewards[t] + gamma * next_value - values[t];
        running = delta + gamma * lambda * carry * running;
        advantages[t] = running;
    }
    let returns = advantages.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((advantages, returns))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambda_zero_is_one_step_td() {
        let r = [1.0, 0.5, -0.2];
        let v = [0.3, 0.1, 0.7];
        let (a, ret) = gae_advantages(&r, &v, &[false, false, false], 0.4, 0.9, 0.0).unwrap();
        assert_eq!(a[0], 1.0 + 0.9 * 0.1 - 0.3);
        assert_eq!(a[1], 0.5 + 0.9 * 0.7 - 0.1);
        assert_eq!(a[2], -0.2 + 0.9 * 0.4 - 0.7);
        assert_eq!(ret[1], a[1] + 0.1);
    }

    #[test]
    fn single_terminal_step() {
        let (a, ret) = gae_advantages(&[1.0], &[0.0], &[true], 5.0, 0.99, 0.95).unwrap();
        assert_eq!(a, vec![1.0]);
        assert_eq!(ret, vec![1.0]);
    }

    #[test]
    fn done_blocks_propagation() {
        let (a, _) = gae_advantages(&[0.0, 10.0], &[0.0, 0.0], &[true, true], 0.0, 1.0, 1.0).unwrap();
        assert_eq!(a, vec![0.0, 10.0]);
    }

    #[test]
    fn length_mismatch_is_a_shape_error() {
        assert!(matches!(
            gae_advantages(&[1.0, 2.0], &[0.0], &[false, false], 0.0, 0.9, 0.9),
            Err(Error::Shape(_))
        ));
    }
}
