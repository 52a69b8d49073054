use crate::nets::Network;
use crate::trainer::LrMultipliers;

pub const DEFAULT_BASE_LR: f64 = 5e-4;
pub const DEFAULT_FACTOR: f64 = 5.0;

/// Learning rate per layer group, earliest group first. The last group gets
/// `base_lr`; each earlier group gets the following group's rate divided by `factor`.
pub fn assign_discriminative_lrs(
    groups: &[String],
    base_lr: f64,
    factor: f64,
) -> Vec<(String, f64)> {
    let mut lrs = vec![0.0; groups.len()];
    let mut lr = base_lr;
    for slot in lrs.iter_mut().rev() {
        *slot = lr;
        lr /= factor;
    }
    groups.iter().cloned().zip(lrs).collect()
}

/// Per-parameter multipliers of the trainer's learning rate that realize
/// the group rates when the trainer runs at `base_lr`.
pub fn discriminative_multipliers<N: Network>(
    model: &N,
    base_lr: f64,
    factor: f64,
) -> LrMultipliers {
    let groups = model.layer_groups();
    let names: Vec<String> = groups.iter().map(|(g, _)| g.clone()).collect();
    let lrs = assign_discriminative_lrs(&names, base_lr, factor);
    let mut out = LrMultipliers::new();
    for ((_, members), (_, lr)) in groups.iter().zip(lrs) {
        for m in members {
            out.insert(m.clone(), lr / base_lr);
        }
    }
    out
}
