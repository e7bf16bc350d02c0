//! Exact tabular solver for the average-reward MaxEnt objective: soft
//! relative value iteration, the policy-induced state-action chain, and
//! stationary distributions by power iteration.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::logsumexp;
use crate::mdp::{TabularMdp, TaskParams};

/// Iteration controls shared by the solver and power iteration.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Lazy-walk weight for power iteration on periodic chains. Each sweep
    /// mixes `(1 - damping) * rho M + damping * rho`, which leaves the fixed
    /// point unchanged. 0 is pure power iteration.
    pub damping: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 100_000,
            damping: 0.0,
        }
    }
}

/// Solution of the soft Bellman optimality system at temperature `alpha`:
/// `V[s] = alpha * logsumexp_a(Q[s][a] / alpha)` with
/// `Q[s][a] = r(s,a) - theta + sum_s' P(s'|s,a) V[s']` and `V[0] = 0`.
#[derive(Debug, Clone)]
pub struct SoftSolution {
    /// Optimal entropy-regularized reward rate.
    pub theta: f64,
    /// Relative value (bias) vector, anchored at state 0.
    pub bias: Array1<f64>,
    /// Stochastic policy table, shape `(n_states, n_actions)`.
    pub policy: Array2<f64>,
    pub alpha: f64,
    /// Sup-norm soft Bellman residual of the returned triple.
    pub residual: f64,
    pub iterations: usize,
}

impl SoftSolution {
    pub fn to_json(&self) -> String {
        let wire = SolutionWire {
            theta: self.theta,
            alpha: self.alpha,
            bias: self.bias.to_vec(),
            policy: self.policy.rows().into_iter().map(|r| r.to_vec()).collect(),
        };
        serde_json::to_string_pretty(&wire).expect("wire struct is serializable")
    }
}

#[derive(Serialize, Deserialize)]
struct SolutionWire {
    theta: f64,
    alpha: f64,
    bias: Vec<f64>,
    policy: Vec<Vec<f64>>,
}

/// Stationary distribution over state-action pairs.
#[derive(Debug, Clone)]
pub struct StationaryDist {
    /// `rho[s * n_actions + a]`, sums to 1.
    pub rho: Array1<f64>,
    /// Total-variation fixed-point residual `TV(rho M, rho)` at exit.
    pub residual: f64,
    pub iterations: usize,
}

/// Soft relative value iteration for the average-reward MaxEnt objective.
///
/// The sweep applies `TV[s] = alpha * logsumexp_a((r[s][a] + (PV)[s][a]) / alpha)`
/// and re-anchors `V` at state 0; `theta` is the anchor's pre-anchoring value.
/// Convergence is measured on the span seminorm of `TV - V`, which bounds the
/// sup-norm Bellman residual of the returned triple.
pub fn solve_soft_avg(
    mdp: &TabularMdp,
    params: &TaskParams,
    alpha: f64,
    opts: &SolveOptions,
) -> Result<SoftSolution> {
    if alpha <= 0.0 || !alpha.is_finite() {
        return Err(Error::Domain(format!("temperature must be positive, got {alpha}")));
    }
    if !mdp.is_irreducible() {
        return Err(Error::Domain(
            "MDP is not irreducible under the uniform policy".into(),
        ));
    }
    let r = mdp.linear_reward(params)?;
    let (s_n, a_n) = (mdp.n_states(), mdp.n_actions());
    let p_flat = mdp
        .transitions()
        .view()
        .into_shape_with_order((s_n * a_n, s_n))
        .expect("kernel is contiguous");

    let mut v = Array1::<f64>::zeros(s_n);
    let mut tv = Array1::<f64>::zeros(s_n);
    let mut buf = vec![0.0; a_n];
    for it in 0..opts.max_iter {
        let pv = p_flat.dot(&v);
        for s in 0..s_n {
            for a in 0..a_n {
                buf[a] = (r[[s, a]] + pv[s * a_n + a]) / alpha;
            }
            tv[s] = alpha * logsumexp(&buf);
        }
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for s in 0..s_n {
            let d = tv[s] - v[s];
            lo = lo.min(d);
            hi = hi.max(d);
        }
        let span = hi - lo;
        if span <= opts.tol {
            let theta = tv[0];
            // residual of (theta, v): sup_s |(tv[s] - theta) - v[s]|
            let residual = (0..s_n)
                .map(|s| ((tv[s] - theta) - v[s]).abs())
                .fold(0.0, f64::max);
            let policy = extract_policy(&r, &p_flat.dot(&v), theta, alpha, s_n, a_n);
            return Ok(SoftSolution {
                theta,
                bias: v,
                policy,
                alpha,
                residual,
                iterations: it + 1,
            });
        }
        let anchor = tv[0];
        for s in 0..s_n {
            v[s] = tv[s] - anchor;
        }
    }
    let span = {
        let pv = p_flat.dot(&v);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for s in 0..s_n {
            for a in 0..a_n {
                buf[a] = (r[[s, a]] + pv[s * a_n + a]) / alpha;
            }
            let d = alpha * logsumexp(&buf) - v[s];
            lo = lo.min(d);
            hi = hi.max(d);
        }
        hi - lo
    };
    Err(Error::NoConvergence {
        iterations: opts.max_iter,
        residual: span,
    })
}

fn extract_policy(
    r: &Array2<f64>,
    pv: &Array1<f64>,
    theta: f64,
    alpha: f64,
    s_n: usize,
    a_n: usize,
) -> Array2<f64> {
    let mut policy = Array2::zeros((s_n, a_n));
    let mut logits = vec![0.0; a_n];
    for s in 0..s_n {
        for a in 0..a_n {
            logits[a] = (r[[s, a]] - theta + pv[s * a_n + a]) / alpha;
        }
        let lse = logsumexp(&logits);
        let mut total = 0.0;
        for a in 0..a_n {
            let p = (logits[a] - lse).exp();
            policy[[s, a]] = p;
            total += p;
        }
        // exact row normalization
        for a in 0..a_n {
            policy[[s, a]] /= total;
        }
    }
    policy
}

/// State-action transition matrix `M[(s,a)][(s',a')] = P(s'|s,a) pi(a'|s')`.
pub fn policy_chain(mdp: &TabularMdp, policy: &Array2<f64>) -> Result<Array2<f64>> {
    let (s_n, a_n) = (mdp.n_states(), mdp.n_actions());
    if policy.dim() != (s_n, a_n) {
        return Err(Error::Dimension(format!(
            "policy has shape {:?}, expected ({s_n}, {a_n})",
            policy.dim()
        )));
    }
    for s in 0..s_n {
        let row = policy.row(s);
        if row.iter().any(|&p| p < 0.0) || (row.sum() - 1.0).abs() > 1e-8 {
            return Err(Error::Domain(format!("policy row {s} is not a distribution")));
        }
    }
    let n = s_n * a_n;
    let mut chain = Array2::zeros((n, n));
    for s in 0..s_n {
        for a in 0..a_n {
            let from = s * a_n + a;
            for t in 0..s_n {
                let p = mdp.transitions()[[s, a, t]];
                if p == 0.0 {
                    continue;
                }
                for b in 0..a_n {
                    chain[[from, t * a_n + b]] = p * policy[[t, b]];
                }
            }
        }
    }
    Ok(chain)
}

/// Power iteration for the stationary distribution of a row-stochastic chain.
pub fn stationary_distribution(chain: &Array2<f64>, opts: &SolveOptions) -> Result<StationaryDist> {
    let n = chain.nrows();
    if chain.ncols() != n {
        return Err(Error::Dimension("chain matrix must be square".into()));
    }
    if !(0.0..1.0).contains(&opts.damping) {
        return Err(Error::Domain(format!("damping must be in [0, 1), got {}", opts.damping)));
    }
    for i in 0..n {
        let row = chain.row(i);
        if row.iter().any(|&p| p < 0.0) || (row.sum() - 1.0).abs() > 1e-8 {
            return Err(Error::Domain(format!("chain row {i} is not a distribution")));
        }
    }
    let mut rho = Array1::from_elem(n, 1.0 / n as f64);
    for it in 0..opts.max_iter {
        let next = rho.dot(chain);
        let residual = 0.5 * rho.iter().zip(next.iter()).map(|(a, b)| (a - b).abs()).sum::<f64>();
        if residual <= opts.tol {
            let mut rho = next;
            let total = rho.sum();
            rho.mapv_inplace(|x| (x / total).max(0.0));
            return Ok(StationaryDist {
                rho,
                residual,
                iterations: it + 1,
            });
        }
        if opts.damping > 0.0 {
            let d = opts.damping;
            rho.zip_mut_with(&next, |r, &nx| *r = d * *r + (1.0 - d) * nx);
        } else {
            rho = next;
        }
        let total = rho.sum();
        rho.mapv_inplace(|x| x / total);
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iter,
        residual: f64::NAN,
    })
}

/// Entropy-regularized average reward of a fixed policy:
/// `theta^pi = sum_(s,a) rho(s,a) [r(s,a) - alpha log pi(a|s)]`.
pub fn policy_reward_rate(
    mdp: &TabularMdp,
    params: &TaskParams,
    alpha: f64,
    policy: &Array2<f64>,
    opts: &SolveOptions,
) -> Result<f64> {
    let r = mdp.linear_reward(params)?;
    let chain = policy_chain(mdp, policy)?;
    let dist = stationary_distribution(&chain, opts)?;
    let a_n = mdp.n_actions();
    let mut rate = 0.0;
    for s in 0..mdp.n_states() {
        for a in 0..a_n {
            let w = dist.rho[s * a_n + a];
            if w > 0.0 {
                rate += w * (r[[s, a]] - alpha * policy[[s, a]].ln());
            }
        }
    }
    Ok(rate)
}
