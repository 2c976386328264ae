//! Exact long-run analysis of a fixed stationary policy.

use nalgebra::{DMatrix, DVector};

use crate::action::Action;
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::ConstrainedMdp;

use super::StationaryPolicy;

/// State the long-run averages are measured from (age 1, lowest level).
pub const INITIAL_STATE: usize = 0;

fn weights(policy: &StationaryPolicy, s: usize) -> [f64; 2] {
    let p = policy.pull_prob(s);
    [1.0 - p, p]
}

fn check_dims<M: ConstrainedMdp>(model: &M, policy: &StationaryPolicy) -> Result<()> {
    if policy.len() != model.num_states() {
        return Err(Error::invalid(format!(
            "policy covers {} states, model has {}",
            policy.len(),
            model.num_states()
        )));
    }
    Ok(())
}

/// Dense kernel of the chain induced by `policy`.
pub fn induced_kernel<M: ConstrainedMdp>(model: &M, policy: &StationaryPolicy) -> DMatrix<f64> {
    let n = model.num_states();
    let mut k = DMatrix::<f64>::zeros(n, n);
    for s in 0..n {
        let w = weights(policy, s);
        for a in Action::ALL {
            if w[a.index()] == 0.0 {
                continue;
            }
            for &(t, p) in model.successors(s, a) {
                k[(s, t)] += w[a.index()] * p;
            }
        }
    }
    k
}

/// Closed communicating classes of the induced chain, each sorted ascending,
/// ordered by smallest member.
pub fn recurrent_classes(kernel: &DMatrix<f64>) -> Vec<Vec<usize>> {
    let n = kernel.nrows();
    let adj: Vec<Vec<usize>> = (0..n)
        .map(|s| (0..n).filter(|&t| kernel[(s, t)] > 0.0).collect())
        .collect();
    let comp = strongly_connected(&adj);
    let ncomp = comp.iter().copied().max().map_or(0, |m| m + 1);
    let mut closed = vec![true; ncomp];
    for s in 0..n {
        for &t in &adj[s] {
            if comp[s] != comp[t] {
                closed[comp[s]] = false;
            }
        }
    }
    let mut classes: Vec<Vec<usize>> = vec![Vec::new(); ncomp];
    for s in 0..n {
        if closed[comp[s]] {
            classes[comp[s]].push(s);
        }
    }
    let mut classes: Vec<Vec<usize>> = classes.into_iter().filter(|c| !c.is_empty()).collect();
    classes.sort_by_key(|c| c[0]);
    classes
}

/// Kosaraju's algorithm with explicit stacks; returns a component id per node.
fn strongly_connected(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let mut order = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    for root in 0..n {
        if seen[root] {
            continue;
        }
        seen[root] = true;
        let mut stack = vec![(root, 0usize)];
        while let Some((node, edge)) = stack.pop() {
            if edge < adj[node].len() {
                stack.push((node, edge + 1));
                let t = adj[node][edge];
                if !seen[t] {
                    seen[t] = true;
                    stack.push((t, 0));
                }
            } else {
                order.push(node);
            }
        }
    }
    let mut radj = vec![Vec::new(); n];
    for (s, outs) in adj.iter().enumerate() {
        for &t in outs {
            radj[t].push(s);
        }
    }
    let mut comp = vec![usize::MAX; n];
    let mut next_id = 0;
    for &root in order.iter().rev() {
        if comp[root] != usize::MAX {
            continue;
        }
        comp[root] = next_id;
        let mut stack = vec![root];
        while let Some(node) = stack.pop() {
            for &t in &radj[node] {
                if comp[t] == usize::MAX {
                    comp[t] = next_id;
                    stack.push(t);
                }
            }
        }
        next_id += 1;
    }
    comp
}

fn class_stationary(kernel: &DMatrix<f64>, class: &[usize]) -> Result<Vec<f64>> {
    let m = class.len();
    let sub = DMatrix::from_fn(m, m, |i, j| kernel[(class[i], class[j])]);
    let rho = linalg::stationary_of(&sub).ok_or(Error::NoUniqueStationary { dimension: 0 })?;
    let mut full = vec![0.0; kernel.nrows()];
    for (i, &s) in class.iter().enumerate() {
        full[s] = rho[i];
    }
    Ok(full)
}

/// Stationary distribution of the policy-induced chain; transient states get 0.
///
/// Fails with [`Error::Multichain`] when the chain has more than one
/// recurrent class.
pub fn policy_stationary_distribution<M: ConstrainedMdp>(
    model: &M,
    policy: &StationaryPolicy,
) -> Result<Vec<f64>> {
    check_dims(model, policy)?;
    let kernel = induced_kernel(model, policy);
    let classes = recurrent_classes(&kernel);
    if classes.len() != 1 {
        return Err(Error::Multichain {
            classes: classes.len(),
        });
    }
    class_stationary(&kernel, &classes[0])
}

/// Cesaro-limit distribution of the induced chain started in `initial`.
///
/// Equals the stationary distribution for unichain policies; for multichain
/// ones it weights each recurrent class by its absorption probability.
pub fn limiting_distribution<M: ConstrainedMdp>(
    model: &M,
    policy: &StationaryPolicy,
    initial: usize,
) -> Result<Vec<f64>> {
    check_dims(model, policy)?;
    let n = model.num_states();
    if initial >= n {
        return Err(Error::invalid(format!(
            "initial state {initial} out of range"
        )));
    }
    let kernel = induced_kernel(model, policy);
    let classes = recurrent_classes(&kernel);
    if classes.len() == 1 {
        return class_stationary(&kernel, &classes[0]);
    }

    let mut class_of = vec![usize::MAX; n];
    for (c, members) in classes.iter().enumerate() {
        for &s in members {
            class_of[s] = c;
        }
    }
    if class_of[initial] != usize::MAX {
        return class_stationary(&kernel, &classes[class_of[initial]]);
    }

    // Absorption probabilities from the transient states: (I - Q) h = b.
    let transient: Vec<usize> = (0..n).filter(|&s| class_of[s] == usize::MAX).collect();
    let pos = |s: usize| transient.iter().position(|&t| t == s);
    let t = transient.len();
    let mut lhs = DMatrix::<f64>::identity(t, t);
    for (i, &s) in transient.iter().enumerate() {
        for (j, &u) in transient.iter().enumerate() {
            lhs[(i, j)] -= kernel[(s, u)];
        }
    }
    let lu = lhs.lu();
    let start = pos(initial).expect("initial state is transient");
    let mut out = vec![0.0; n];
    for (c, members) in classes.iter().enumerate() {
        let b = DVector::from_fn(t, |i, _| {
            members.iter().map(|&u| kernel[(transient[i], u)]).sum()
        });
        let h = lu
            .solve(&b)
            .ok_or(Error::NoUniqueStationary { dimension: 0 })?;
        let weight = h[start];
        if weight <= 0.0 {
            continue;
        }
        let rho = class_stationary(&kernel, &classes[c])?;
        for (o, r) in out.iter_mut().zip(rho) {
            *o += weight * r;
        }
    }
    Ok(out)
}

/// Expected one-step reward and cost in each state under `policy`.
pub fn per_state_reward_cost<M: ConstrainedMdp>(
    model: &M,
    policy: &StationaryPolicy,
) -> (Vec<f64>, Vec<f64>) {
    let n = model.num_states();
    let mut reward = vec![0.0; n];
    let mut cost = vec![0.0; n];
    for s in 0..n {
        let w = weights(policy, s);
        for a in Action::ALL {
            let wa = w[a.index()];
            if wa == 0.0 {
                continue;
            }
            let r: f64 = model
                .successors(s, a)
                .iter()
                .map(|&(t, p)| p * model.reward(s, a, t))
                .sum();
            reward[s] += wa * r;
            cost[s] += wa * model.action_cost(s, a);
        }
    }
    (reward, cost)
}

/// Long-run averages `(reward, cost)` from [`INITIAL_STATE`].
pub fn average_reward_cost<M: ConstrainedMdp>(
    model: &M,
    policy: &StationaryPolicy,
) -> Result<(f64, f64)> {
    let rho = limiting_distribution(model, policy, INITIAL_STATE)?;
    let (r, c) = per_state_reward_cost(model, policy);
    let dot = |x: &[f64]| rho.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    Ok((dot(&r), dot(&c)))
}

/// Long-run average cost per slot.
pub fn average_cost<M: ConstrainedMdp>(model: &M, policy: &StationaryPolicy) -> Result<f64> {
    average_reward_cost(model, policy).map(|(_, c)| c)
}

/// Long-run average reward per slot (before the Lagrangian term).
pub fn average_reward<M: ConstrainedMdp>(model: &M, policy: &StationaryPolicy) -> Result<f64> {
    average_reward_cost(model, policy).map(|(r, _)| r)
}
