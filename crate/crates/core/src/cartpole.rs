//! Classic cart-pole balancing, for evaluating extracted trees as control
//! policies.

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::{Label, Labels};
use crate::oracle::Oracle;
use crate::par;
use crate::rng::Stream;
use crate::space::{check_dim, FeatureSpace, Task};
use crate::tree::DecisionTree;

pub const FEATURE_NAMES: [&str; 4] = ["cart_position", "cart_velocity", "pole_angle", "pole_velocity"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CartPoleConfig {
    pub gravity: f64,
    pub cart_mass: f64,
    pub pole_mass: f64,
    /// Half the pole length.
    pub half_length: f64,
    pub force: f64,
    pub tau: f64,
    pub angle_limit_degrees: f64,
    pub position_limit: f64,
    pub horizon: usize,
    /// Initial coordinates are uniform on [−start, start].
    pub start: f64,
}

impl Default for CartPoleConfig {
    fn default() -> Self {
        CartPoleConfig {
            gravity: 9.8,
            cart_mass: 1.0,
            pole_mass: 0.1,
            half_length: 0.5,
            force: 10.0,
            tau: 0.02,
            angle_limit_degrees: 12.0,
            position_limit: 2.4,
            horizon: 200,
            start: 0.05,
        }
    }
}

impl CartPoleConfig {
    fn angle_limit(&self) -> f64 {
        self.angle_limit_degrees * 2.0 * std::f64::consts::PI / 360.0
    }

    fn validate(&self) -> Result<()> {
        let positive = [
            self.gravity,
            self.cart_mass,
            self.pole_mass,
            self.half_length,
            self.force,
            self.tau,
            self.angle_limit_degrees,
            self.position_limit,
        ];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) || !(self.start >= 0.0) || self.horizon == 0 {
            return Err(Error::domain("cart-pole constants must be positive and finite"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub x: f64,
    pub x_dot: f64,
    pub theta: f64,
    pub theta_dot: f64,
    pub steps: usize,
}

impl State {
    pub fn features(&self) -> [f64; 4] {
        [self.x, self.x_dot, self.theta, self.theta_dot]
    }

    pub fn is_terminal(&self, cfg: &CartPoleConfig) -> bool {
        self.x.abs() > cfg.position_limit || self.theta.abs() > cfg.angle_limit() || self.steps >= cfg.horizon
    }

    pub fn mirrored(&self) -> State {
        State {
            x: -self.x,
            x_dot: -self.x_dot,
            theta: -self.theta,
            theta_dot: -self.theta_dot,
            steps: self.steps,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Action {
    Left = 0,
    Right = 1,
}

impl Action {
    pub fn from_label(label: Label) -> Result<Self> {
        match label {
            Label::Class(0) => Ok(Action::Left),
            Label::Class(1) => Ok(Action::Right),
            other => Err(Error::domain(format!("{other} is not a cart-pole action"))),
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Action::Left => Action::Right,
            Action::Right => Action::Left,
        }
    }
}

/// One Euler step of the cart-pole dynamics.
pub fn step(s: &State, a: Action, cfg: &CartPoleConfig) -> Result<State> {
    if s.is_terminal(cfg) {
        return Err(Error::domain("cannot step from a terminal state"));
    }
    let force = match a {
        Action::Right => cfg.force,
        Action::Left => -cfg.force,
    };
    let total_mass = cfg.cart_mass + cfg.pole_mass;
    let pole_mass_length = cfg.pole_mass * cfg.half_length;
    let (sin, cos) = s.theta.sin_cos();
    let temp = (force + pole_mass_length * s.theta_dot * s.theta_dot * sin) / total_mass;
    let theta_acc =
        (cfg.gravity * sin - cos * temp) / (cfg.half_length * (4.0 / 3.0 - cfg.pole_mass * cos * cos / total_mass));
    let x_acc = temp - pole_mass_length * theta_acc * cos / total_mass;
    Ok(State {
        x: s.x + cfg.tau * s.x_dot,
        x_dot: s.x_dot + cfg.tau * x_acc,
        theta: s.theta + cfg.tau * s.theta_dot,
        theta_dot: s.theta_dot + cfg.tau * theta_acc,
        steps: s.steps + 1,
    })
}

pub fn initial_state(stream: Stream, cfg: &CartPoleConfig) -> State {
    let mut rng = stream.rng();
    let mut u = || cfg.start * (2.0 * rng.random::<f64>() - 1.0);
    State {
        x: u(),
        x_dot: u(),
        theta: u(),
        theta_dot: u(),
        steps: 0,
    }
}

/// Linear bang-bang feedback: push right when 0.1x + 0.5ẋ + 10θ + 2θ̇ > 0.
pub fn expert_policy(s: &[f64; 4]) -> Action {
    let drive = 0.1 * s[0] + 0.5 * s[1] + 10.0 * s[2] + 2.0 * s[3];
    if drive > 0.0 {
        Action::Right
    } else {
        Action::Left
    }
}

pub fn feature_space() -> FeatureSpace {
    FeatureSpace::numeric(&FEATURE_NAMES).expect("distinct names")
}

/// The expert as a two-class oracle on the four state coordinates.
#[derive(Clone, Copy, Debug, Default)]
pub struct ExpertOracle;

impl Oracle for ExpertOracle {
    fn dimension(&self) -> usize {
        4
    }

    fn task(&self) -> Task {
        Task::Classification
    }

    fn predict_batch(&self, x: ArrayView2<'_, f64>) -> Result<Labels> {
        check_dim(4, x.ncols())?;
        Ok(Labels::Classes(
            x.rows()
                .into_iter()
                .map(|r| expert_policy(&[r[0], r[1], r[2], r[3]]) as usize)
                .collect(),
        ))
    }
}

/// Wraps a two-class tree as a policy.
pub fn tree_policy(tree: &DecisionTree) -> Result<impl Fn(&[f64; 4]) -> Result<Action> + Sync + '_> {
    check_dim(4, tree.dim())?;
    if tree.task() != Task::Classification {
        return Err(Error::domain("a policy tree must be a classifier"));
    }
    Ok(move |s: &[f64; 4]| Action::from_label(tree.predict(s)?))
}

/// Runs one episode; returns the visited non-terminal states and the reward,
/// which is the number of steps taken.
pub fn episode<P>(policy: &P, start: State, cfg: &CartPoleConfig) -> Result<(Vec<State>, usize)>
where
    P: Fn(&[f64; 4]) -> Result<Action>,
{
    let mut s = start;
    let mut visited = Vec::new();
    while !s.is_terminal(cfg) {
        visited.push(s);
        s = step(&s, policy(&s.features())?, cfg)?;
    }
    Ok((visited, s.steps))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardReport {
    pub episodes: usize,
    pub seed: u64,
    pub mean: f64,
    pub std: f64,
    pub min: usize,
    pub max: usize,
    pub rewards: Vec<usize>,
}

impl RewardReport {
    pub fn render(&self) -> String {
        format!(
            "episodes {}  mean {:.2}  std {:.2}  min {}  max {}\n",
            self.episodes, self.mean, self.std, self.min, self.max
        )
    }
}

pub fn evaluate_policy<P>(policy: &P, episodes: usize, seed: u64, cfg: &CartPoleConfig) -> Result<RewardReport>
where
    P: Fn(&[f64; 4]) -> Result<Action> + Sync,
{
    cfg.validate()?;
    if episodes == 0 {
        return Err(Error::domain("need at least one episode"));
    }
    let base = Stream::new(seed);
    let rewards = par::try_map_range(episodes, |e| {
        episode(policy, initial_state(base.child(e as u64), cfg), cfg).map(|r| r.1)
    })?;
    let n = episodes as f64;
    let mean = rewards.iter().map(|&r| r as f64).sum::<f64>() / n;
    let var = rewards.iter().map(|&r| (r as f64 - mean).powi(2)).sum::<f64>() / n;
    Ok(RewardReport {
        episodes,
        seed,
        mean,
        std: var.sqrt(),
        min: rewards.iter().copied().min().unwrap_or(0),
        max: rewards.iter().copied().max().unwrap_or(0),
        rewards,
    })
}

/// States visited by `policy` over `episodes` rollouts, episode by episode.
pub fn rollout_states<P>(policy: &P, episodes: usize, seed: u64, cfg: &CartPoleConfig) -> Result<Array2<f64>>
where
    P: Fn(&[f64; 4]) -> Result<Action> + Sync,
{
    cfg.validate()?;
    let base = Stream::new(seed);
    let runs = par::try_map_range(episodes, |e| episode(policy, initial_state(base.child(e as u64), cfg), cfg))?;
    let flat: Vec<f64> = runs.iter().flat_map(|(v, _)| v.iter().flat_map(|s| s.features())).collect();
    Ok(Array2::from_shape_vec((flat.len() / 4, 4), flat).expect("four columns"))
}

pub fn expert(s: &[f64; 4]) -> Result<Action> {
    Ok(expert_policy(s))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mirror_symmetry_is_exact() {
        let cfg = CartPoleConfig::default();
        let mut s = initial_state(Stream::new(3), &cfg);
        let mut m = s.mirrored();
        let actions = [Action::Left, Action::Right, Action::Right, Action::Left, Action::Left];
        for a in actions.iter().cycle().take(40) {
            if s.is_terminal(&cfg) {
                break;
            }
            s = step(&s, *a, &cfg).unwrap();
            m = step(&m, a.flipped(), &cfg).unwrap();
            assert_eq!(m, s.mirrored());
        }
    }

    #[test]
    fn alternating_forces_drift_symmetrically() {
        let cfg = CartPoleConfig::default();
        let rest = State { x: 0.0, x_dot: 0.0, theta: 0.0, theta_dot: 0.0, steps: 0 };
        let (mut a, mut b) = (rest, rest);
        for i in 0..20 {
            let act = if i % 2 == 0 { Action::Left } else { Action::Right };
            a = step(&a, act, &cfg).unwrap();
            b = step(&b, act.flipped(), &cfg).unwrap();
        }
        assert_eq!(a.x, -b.x);
    }

    #[test]
    fn angle_beyond_limit_is_terminal() {
        let cfg = CartPoleConfig::default();
        let s = State { x: 0.0, x_dot: 0.0, theta: 0.25, theta_dot: 1.0, steps: 0 };
        assert!(s.is_terminal(&cfg));
        assert!(step(&s, Action::Left, &cfg).is_err());
        let s = State { theta: 0.2094, theta_dot: 1.0, ..s };
        assert!(!s.is_terminal(&cfg));
        assert!(step(&s, Action::Right, &cfg).unwrap().is_terminal(&cfg));
    }

    #[test]
    fn expert_saturates_and_always_left_fails() {
        let cfg = CartPoleConfig::default();
        let r = evaluate_policy(&expert, 100, 0, &cfg).unwrap();
        assert_eq!(r.mean, 200.0);
        let left = |_: &[f64; 4]| Ok(Action::Left);
        let r = evaluate_policy(&left, 100, 0, &cfg).unwrap();
        assert!(r.mean < 50.0, "{}", r.mean);
        assert!(r.rewards.iter().all(|&x| (1..=200).contains(&x)));
    }

    #[test]
    fn evaluation_is_deterministic() {
        let cfg = CartPoleConfig::default();
        let p = |s: &[f64; 4]| Ok(if s[2] > 0.0 { Action::Right } else { Action::Left });
        assert_eq!(evaluate_policy(&p, 30, 9, &cfg).unwrap(), evaluate_policy(&p, 30, 9, &cfg).unwrap());
    }

    #[test]
    fn rollouts_collect_every_visited_state() {
        let cfg = CartPoleConfig::default();
        let x = rollout_states(&expert, 3, 0, &cfg).unwrap();
        assert_eq!(x.nrows(), 600);
    }
}
