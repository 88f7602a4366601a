//! Batch construction: top-k, greedy set maximization, BAIT, BADGE and an
//! exhaustive reference.
//!
//! Ties are broken towards the lowest pool index everywhere.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::info_scores::{Approx, EvalInformation, IncrementalObjective, Orientation, Scorer, SetObjective};
use crate::similarity::JacobianDataMatrix;

/// Upper bound on the number of subsets [`exhaustive_best`] enumerates.
pub const EXHAUSTIVE_LIMIT: u128 = 1_000_000;

/// BAIT grows the forward set to `multiplier · k` before pruning.
pub const BAIT_DEFAULT_MULTIPLIER: usize = 2;

#[derive(Clone, Debug, PartialEq)]
pub struct SelectionResult {
    /// Pool indices in selection order.
    pub indices: Vec<usize>,
    pub objective_value: f64,
    pub method: String,
    /// Per-step change of the objective.
    pub gains: Vec<f64>,
}

fn check_batch(k: usize, available: usize) -> Result<()> {
    if k > available {
        return Err(Error::BatchTooLarge {
            requested: k,
            available,
        });
    }
    Ok(())
}

/// The `k` highest scores, ties by lower index. The objective is their sum.
pub fn top_k(scores: &[f64], k: usize) -> Result<SelectionResult> {
    check_batch(k, scores.len())?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.truncate(k);
    let gains: Vec<f64> = order.iter().map(|&i| scores[i]).collect();
    Ok(SelectionResult {
        objective_value: gains.iter().sum(),
        indices: order,
        method: "top_k".into(),
        gains,
    })
}

fn fisher_factors(scorer: &Scorer<'_>, pool: &[DVector<f64>]) -> Result<Vec<DMatrix<f64>>> {
    pool.par_iter().map(|x| scorer.model().fisher_factor(x)).collect()
}

/// Index of the best value among `candidates`, lowest index on ties.
fn best_of(orientation: Orientation, candidates: &[usize], values: &[f64]) -> usize {
    let mut best = 0;
    for j in 1..candidates.len() {
        if orientation.better(values[j], values[best]) {
            best = j;
        }
    }
    best
}

/// Greedy: repeatedly adds the candidate with the best marginal gain (largest
/// for EIG, smallest for the EPIG family).
pub fn greedy(
    scorer: &Scorer<'_>,
    pool: &[DVector<f64>],
    k: usize,
    objective: &SetObjective,
) -> Result<SelectionResult> {
    check_batch(k, pool.len())?;
    let factors = fisher_factors(scorer, pool)?;
    let mut state = IncrementalObjective::new(scorer, objective.clone())?;
    let (indices, gains) = greedy_grow(&mut state, &factors, k)?;
    Ok(SelectionResult {
        indices,
        objective_value: state.value(),
        method: format!("greedy_{}", objective.name()),
        gains,
    })
}

fn greedy_grow(
    state: &mut IncrementalObjective<'_>,
    factors: &[DMatrix<f64>],
    k: usize,
) -> Result<(Vec<usize>, Vec<f64>)> {
    let orientation = state.objective().orientation();
    let mut remaining: Vec<usize> = (0..factors.len()).collect();
    let mut indices = Vec::with_capacity(k);
    let mut gains = Vec::with_capacity(k);
    for _ in 0..k {
        let st = &*state;
        let values: Vec<f64> = remaining
            .par_iter()
            .map(|&i| st.gain(&factors[i]))
            .collect::<Result<_>>()?;
        let pos = best_of(orientation, &remaining, &values);
        let chosen = remaining.remove(pos);
        state.commit(&factors[chosen])?;
        indices.push(chosen);
        gains.push(values[pos]);
    }
    Ok((indices, gains))
}

/// BAIT: forward-greedy to `multiplier · k` points on the EPIG trace proxy
/// `½ tr((F_batch + P)⁻¹ F̄_eval)`, then backward-greedy removal of the point
/// whose removal increases the objective least, until `k` remain.
pub fn bait_forward_backward(
    scorer: &Scorer<'_>,
    pool: &[DVector<f64>],
    k: usize,
    eval: &EvalInformation,
    multiplier: usize,
) -> Result<SelectionResult> {
    let width = k.checked_mul(multiplier.max(1)).ok_or(Error::BatchTooLarge {
        requested: usize::MAX,
        available: pool.len(),
    })?;
    check_batch(width, pool.len())?;
    let objective = SetObjective::Transductive(Approx::Trace, eval.clone());
    let factors = fisher_factors(scorer, pool)?;
    let mut state = IncrementalObjective::new(scorer, objective.clone())?;
    let (mut chosen, mut gains) = greedy_grow(&mut state, &factors, width)?;
    let mut value = state.value();

    while chosen.len() > k {
        let values: Vec<f64> = (0..chosen.len())
            .into_par_iter()
            .map(|drop| {
                let xs: Vec<DVector<f64>> = chosen
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != drop)
                    .map(|(_, &i)| pool[i].clone())
                    .collect();
                objective.value(scorer, &xs)
            })
            .collect::<Result<_>>()?;
        // lowest pool index among equal values
        let mut best = 0;
        for j in 1..chosen.len() {
            if values[j] < values[best] || (values[j] == values[best] && chosen[j] < chosen[best]) {
                best = j;
            }
        }
        gains.push(values[best] - value);
        value = values[best];
        chosen.remove(best);
    }
    Ok(SelectionResult {
        indices: chosen,
        objective_value: value,
        method: "bait".into(),
        gains,
    })
}

/// BADGE: k-means++ seeding on the rows of `g` under squared Euclidean
/// distance. When every remaining distance is zero the next center is drawn
/// uniformly from the unchosen rows.
///
/// The objective is the final k-means potential `Σᵢ minⱼ ‖gᵢ − cⱼ‖²`; the gains
/// record the squared distance of each new center.
pub fn badge_kmeanspp(g: &JacobianDataMatrix, k: usize, seed: u64) -> Result<SelectionResult> {
    let n = g.len();
    check_batch(k, n)?;
    let rows = g.rows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = Vec::with_capacity(k);
    let mut taken = vec![false; n];
    let mut dist = vec![f64::INFINITY; n];
    let mut gains = Vec::with_capacity(k);
    for step in 0..k {
        let next = if step == 0 {
            rng.random_range(0..n)
        } else {
            let total: f64 = (0..n).filter(|&i| !taken[i]).map(|i| dist[i]).sum();
            if total > 0.0 {
                let target = rng.random::<f64>() * total;
                let mut acc = 0.0;
                let mut pick = None;
                let mut last = 0;
                for i in (0..n).filter(|&i| !taken[i]) {
                    if dist[i] > 0.0 {
                        last = i;
                        acc += dist[i];
                        if target < acc {
                            pick = Some(i);
                            break;
                        }
                    }
                }
                pick.unwrap_or(last)
            } else {
                let free: Vec<usize> = (0..n).filter(|&i| !taken[i]).collect();
                free[rng.random_range(0..free.len())]
            }
        };
        gains.push(if step == 0 { 0.0 } else { dist[next] });
        taken[next] = true;
        chosen.push(next);
        let center = rows.row(next);
        for i in 0..n {
            let d = (rows.row(i) - center).norm_squared();
            if d < dist[i] {
                dist[i] = d;
            }
        }
    }
    let potential = if k == 0 { 0.0 } else { dist.iter().sum() };
    Ok(SelectionResult {
        indices: chosen,
        objective_value: potential,
        method: "badge".into(),
        gains,
    })
}

/// `C(n, k)`, saturating once it exceeds `cap`.
pub fn binomial(n: usize, k: usize, cap: u128) -> u128 {
    let k = k.min(n - k.min(n));
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > cap {
            return acc;
        }
    }
    acc
}

/// Best `k`-subset by enumeration in lexicographic order; the first optimum wins.
pub fn exhaustive_best(
    scorer: &Scorer<'_>,
    pool: &[DVector<f64>],
    k: usize,
    objective: &SetObjective,
) -> Result<SelectionResult> {
    check_batch(k, pool.len())?;
    let count = binomial(pool.len(), k, EXHAUSTIVE_LIMIT);
    if count > EXHAUSTIVE_LIMIT {
        return Err(Error::TooManySubsets {
            count,
            limit: EXHAUSTIVE_LIMIT,
        });
    }
    let orientation = objective.orientation();
    let mut subset: Vec<usize> = (0..k).collect();
    let mut best: Option<(Vec<usize>, f64)> = None;
    loop {
        let xs: Vec<DVector<f64>> = subset.iter().map(|&i| pool[i].clone()).collect();
        let v = objective.value(scorer, &xs)?;
        if best.as_ref().is_none_or(|(_, b)| orientation.better(v, *b)) {
            best = Some((subset.clone(), v));
        }
        if !next_combination(&mut subset, pool.len()) {
            break;
        }
    }
    let (indices, objective_value) = best.expect("at least one subset");
    Ok(SelectionResult {
        indices,
        objective_value,
        method: format!("exhaustive_{}", objective.name()),
        gains: Vec::new(),
    })
}

/// Advances `c` to the next `k`-combination of `0..n`; false after the last.
fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if c[i] < n - k + i {
            c[i] += 1;
            for j in (i + 1)..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}
