//! Finite MDPs with rewards linear in a fixed feature map, plus the
//! deterministic gridworld generator used by the experiments.

use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-stochasticity slack tolerated on transition kernels.
pub const KERNEL_TOL: f64 = 1e-12;

/// A tabular MDP: dense transition kernel `P[s][a][s']` and a feature map
/// `phi(s, a)` in `R^L`. Rewards are `r(s, a) = lambda . phi(s, a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    n_states: usize,
    n_actions: usize,
    transitions: Array3<f64>,
    /// Row `s * n_actions + a` holds `phi(s, a)`.
    features: Array2<f64>,
}

impl TabularMdp {
    pub fn new(transitions: Array3<f64>, features: Array2<f64>) -> Result<Self> {
        let (n_states, n_actions, n_next) = transitions.dim();
        if n_states == 0 || n_actions == 0 {
            return Err(Error::Config("empty state or action space".into()));
        }
        if n_next != n_states {
            return Err(Error::Dimension(format!(
                "transition kernel maps to {} states, expected {}",
                n_next, n_states
            )));
        }
        if features.nrows() != n_states * n_actions {
            return Err(Error::Dimension(format!(
                "feature table has {} rows, expected {}",
                features.nrows(),
                n_states * n_actions
            )));
        }
        for s in 0..n_states {
            for a in 0..n_actions {
                let row = transitions.slice(ndarray::s![s, a, ..]);
                if row.iter().any(|&p| p < 0.0) {
                    return Err(Error::Config(format!(
                        "negative transition probability at (s={s}, a={a})"
                    )));
                }
                let sum: f64 = row.sum();
                if (sum - 1.0).abs() > KERNEL_TOL {
                    return Err(Error::Config(format!(
                        "transition row (s={s}, a={a}) sums to {sum}, expected 1"
                    )));
                }
            }
        }
        Ok(Self {
            n_states,
            n_actions,
            transitions,
            features,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    /// Number of state-action pairs, the dimension of the policy-induced chain.
    pub fn n_pairs(&self) -> usize {
        self.n_states * self.n_actions
    }

    /// Feature dimension `L`.
    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn transitions(&self) -> &Array3<f64> {
        &self.transitions
    }

    /// Features as an `(n_pairs, L)` table, row `s * n_actions + a`.
    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn pair_index(&self, state: usize, action: usize) -> usize {
        state * self.n_actions + action
    }

    /// `r[s][a] = lambda . phi(s, a)`.
    pub fn linear_reward(&self, params: &TaskParams) -> Result<Array2<f64>> {
        if params.dim() != self.feature_dim() {
            return Err(Error::Dimension(format!(
                "task has {} weights, feature map has dimension {}",
                params.dim(),
                self.feature_dim()
            )));
        }
        let lam = ndarray::ArrayView1::from(params.as_slice());
        let flat = self.features.dot(&lam);
        Ok(flat
            .into_shape_with_order((self.n_states, self.n_actions))
            .expect("n_pairs = n_states * n_actions"))
    }

    /// True when every state is reachable from every other under the
    /// uniform-policy support graph (forward and backward BFS from state 0).
    pub fn is_irreducible(&self) -> bool {
        let fwd = self.reachable(false);
        let bwd = self.reachable(true);
        fwd.iter().all(|&v| v) && bwd.iter().all(|&v| v)
    }

    fn reachable(&self, reverse: bool) -> Vec<bool> {
        let mut seen = vec![false; self.n_states];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(s) = stack.pop() {
            for a in 0..self.n_actions {
                for t in 0..self.n_states {
                    let p = if reverse {
                        self.transitions[[t, a, s]]
                    } else {
                        self.transitions[[s, a, t]]
                    };
                    if p > 0.0 && !seen[t] {
                        seen[t] = true;
                        stack.push(t);
                    }
                }
            }
        }
        seen
    }

    pub fn to_json(&self) -> String {
        let wire = MdpWire {
            n_states: self.n_states,
            n_actions: self.n_actions,
            transitions: (0..self.n_states)
                .map(|s| {
                    (0..self.n_actions)
                        .map(|a| self.transitions.slice(ndarray::s![s, a, ..]).to_vec())
                        .collect()
                })
                .collect(),
            features: (0..self.n_states)
                .map(|s| {
                    (0..self.n_actions)
                        .map(|a| self.features.row(self.pair_index(s, a)).to_vec())
                        .collect()
                })
                .collect(),
        };
        serde_json::to_string_pretty(&wire).expect("wire struct is serializable")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let wire: MdpWire =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("mdp json: {e}")))?;
        let (s, a) = (wire.n_states, wire.n_actions);
        if wire.transitions.len() != s {
            return Err(Error::Dimension("transitions outer length != n_states".into()));
        }
        let l = wire
            .features
            .first()
            .and_then(|row| row.first())
            .map(|f| f.len())
            .unwrap_or(0);
        let mut transitions = Array3::zeros((s, a, s));
        let mut features = Array2::zeros((s * a, l));
        for (si, per_state) in wire.transitions.iter().enumerate() {
            if per_state.len() != a {
                return Err(Error::Dimension("transitions inner length != n_actions".into()));
            }
            for (ai, row) in per_state.iter().enumerate() {
                if row.len() != s {
                    return Err(Error::Dimension("transition row length != n_states".into()));
                }
                for (ti, &p) in row.iter().enumerate() {
                    transitions[[si, ai, ti]] = p;
                }
            }
        }
        if wire.features.len() != s {
            return Err(Error::Dimension("features outer length != n_states".into()));
        }
        for (si, per_state) in wire.features.iter().enumerate() {
            if per_state.len() != a {
                return Err(Error::Dimension("features inner length != n_actions".into()));
            }
            for (ai, row) in per_state.iter().enumerate() {
                if row.len() != l {
                    return Err(Error::Dimension("inconsistent feature dimension".into()));
                }
                for (fi, &x) in row.iter().enumerate() {
                    features[[si * a + ai, fi]] = x;
                }
            }
        }
        Self::new(transitions, features)
    }
}

#[derive(Serialize, Deserialize)]
struct MdpWire {
    n_states: usize,
    n_actions: usize,
    transitions: Vec<Vec<Vec<f64>>>,
    features: Vec<Vec<Vec<f64>>>,
}

/// A point in task space: the reward weights `lambda` in `R^L`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskParams(pub Vec<f64>);

impl TaskParams {
    pub fn new(lambda: Vec<f64>) -> Self {
        Self(lambda)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for TaskParams {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// The four cardinal moves of the gridworld, in action-index order.
pub const GRID_ACTIONS: [(i64, i64); 4] = [(0, -1), (0, 1), (-1, 0), (1, 0)];

/// Rectangular gridworld with one-hot state features at chosen cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridWorldSpec {
    pub width: usize,
    pub height: usize,
    /// One `(x, y)` cell per feature; feature i is 1 exactly on that cell.
    pub feature_corners: Vec<(usize, usize)>,
}

impl GridWorldSpec {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::Config("gridworld dimensions must be positive".into()));
        }
        if self.feature_corners.is_empty() {
            return Err(Error::Config("at least one feature corner required".into()));
        }
        for &(x, y) in &self.feature_corners {
            if x >= self.width || y >= self.height {
                return Err(Error::Config(format!(
                    "feature corner ({x}, {y}) outside {}x{} grid",
                    self.width, self.height
                )));
            }
        }
        for (i, a) in self.feature_corners.iter().enumerate() {
            if self.feature_corners[..i].contains(a) {
                return Err(Error::Config(format!("duplicate feature corner {a:?}")));
            }
        }
        Ok(())
    }
}

/// Build the deterministic cardinal-move gridworld. States are cells in
/// row-major order (`s = y * width + x`); moving into a wall leaves the
/// state unchanged. Feature i is 1 on every action taken from corner i.
pub fn build_gridworld(spec: &GridWorldSpec) -> Result<TabularMdp> {
    spec.validate()?;
    let (w, h) = (spec.width, spec.height);
    let n_states = w * h;
    let n_actions = GRID_ACTIONS.len();
    let l = spec.feature_corners.len();
    let mut transitions = Array3::zeros((n_states, n_actions, n_states));
    let mut features = Array2::zeros((n_states * n_actions, l));
    for y in 0..h {
        for x in 0..w {
            let s = y * w + x;
            for (a, &(dx, dy)) in GRID_ACTIONS.iter().enumerate() {
                let nx = x as i64 + dx;
                let ny = y as i64 + dy;
                let (nx, ny) = if nx < 0 || nx >= w as i64 || ny < 0 || ny >= h as i64 {
                    (x, y)
                } else {
                    (nx as usize, ny as usize)
                };
                transitions[[s, a, ny * w + nx]] = 1.0;
                for (i, &(cx, cy)) in spec.feature_corners.iter().enumerate() {
                    if (x, y) == (cx, cy) {
                        features[[s * n_actions + a, i]] = 1.0;
                    }
                }
            }
        }
    }
    TabularMdp::new(transitions, features)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn seven() -> TabularMdp {
        build_gridworld(&GridWorldSpec {
            width: 7,
            height: 7,
            feature_corners: vec![(0, 0), (6, 6)],
        })
        .unwrap()
    }

    #[test]
    fn paper_gridworld_shape() {
        let mdp = seven();
        assert_eq!(mdp.n_states(), 49);
        assert_eq!(mdp.n_actions(), 4);
        assert_eq!(mdp.feature_dim(), 2);
    }

    #[test]
    fn single_cell_grid_self_loops() {
        let mdp = build_gridworld(&GridWorldSpec {
            width: 1,
            height: 1,
            feature_corners: vec![(0, 0)],
        })
        .unwrap();
        for a in 0..4 {
            assert_eq!(mdp.transitions()[[0, a, 0]], 1.0);
            assert_eq!(mdp.features()[[a, 0]], 1.0);
        }
    }

    #[test]
    fn two_by_two_matches_hand_enumeration() {
        // states: 0=(0,0) 1=(1,0) 2=(0,1) 3=(1,1); actions up,down,left,right
        let mdp = build_gridworld(&GridWorldSpec {
            width: 2,
            height: 2,
            feature_corners: vec![(0, 0), (1, 1)],
        })
        .unwrap();
        let expect = [
            // state 0: up clamps, down -> 2, left clamps, right -> 1
            [(0, 0), (1, 2), (2, 0), (3, 1)],
            [(0, 1), (1, 3), (2, 0), (3, 1)],
            [(0, 0), (1, 2), (2, 2), (3, 3)],
            [(0, 1), (1, 3), (2, 2), (3, 3)],
        ];
        for (s, row) in expect.iter().enumerate() {
            for &(a, target) in row {
                for t in 0..4 {
                    let want = if t == target { 1.0 } else { 0.0 };
                    assert_eq!(mdp.transitions()[[s, a, t]], want, "s={s} a={a} t={t}");
                }
            }
        }
        // feature 0 on state 0 only, feature 1 on state 3 only
        for s in 0..4 {
            for a in 0..4 {
                let idx = mdp.pair_index(s, a);
                assert_eq!(mdp.features()[[idx, 0]], if s == 0 { 1.0 } else { 0.0 });
                assert_eq!(mdp.features()[[idx, 1]], if s == 3 { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn linear_reward_zero_weights() {
        let mdp = seven();
        let r = mdp.linear_reward(&TaskParams::new(vec![0.0, 0.0])).unwrap();
        assert!(r.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn linear_reward_one_hot() {
        let mdp = seven();
        let r = mdp.linear_reward(&TaskParams::new(vec![1.0, 0.0])).unwrap();
        for s in 0..49 {
            for a in 0..4 {
                assert_eq!(r[[s, a]], if s == 0 { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn linear_reward_mixed_weights() {
        let mdp = seven();
        let r = mdp
            .linear_reward(&TaskParams::new(vec![0.5, -0.3]))
            .unwrap();
        assert_relative_eq!(r[[0, 2]], 0.5);
        assert_relative_eq!(r[[48, 1]], -0.3);
        assert_eq!(r[[24, 0]], 0.0);
    }

    #[test]
    fn linear_reward_rejects_dimension_mismatch() {
        let mdp = seven();
        assert!(mdp.linear_reward(&TaskParams::new(vec![1.0])).is_err());
    }

    #[test]
    fn corner_outside_grid_rejected() {
        let bad = GridWorldSpec {
            width: 3,
            height: 3,
            feature_corners: vec![(0, 0), (3, 1)],
        };
        assert!(matches!(build_gridworld(&bad), Err(Error::Config(_))));
    }

    #[test]
    fn duplicate_corner_rejected() {
        let bad = GridWorldSpec {
            width: 3,
            height: 3,
            feature_corners: vec![(1, 1), (1, 1)],
        };
        assert!(matches!(build_gridworld(&bad), Err(Error::Config(_))));
    }

    #[test]
    fn json_round_trip() {
        let mdp = build_gridworld(&GridWorldSpec {
            width: 3,
            height: 2,
            feature_corners: vec![(0, 0), (2, 1)],
        })
        .unwrap();
        let back = TabularMdp::from_json(&mdp.to_json()).unwrap();
        assert_eq!(mdp, back);
    }

    #[test]
    fn gridworld_is_irreducible() {
        assert!(seven().is_irreducible());
    }
}
