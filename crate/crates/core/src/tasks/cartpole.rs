//! Cart-pole swing-up. θ = 0 is upright; episodes start near hanging (easy)
//! or anywhere (hard) and last up to 1000 steps. Reward per step is
//! (1 + cos θ)/2, so a perfect episode scores 1000.

use std::sync::Arc;

use crate::error::Result;
use crate::image::RgbImage;
use crate::splitrng::Key;
use crate::task::{check_actions, check_keys, Render, StepResult, TaskState, VectorizedTask};
use crate::tensor::{Observation, Tensor};

pub const CART_MASS: f32 = 1.0;
pub const POLE_MASS: f32 = 0.1;
/// Half the pole length.
pub const POLE_HALF_LENGTH: f32 = 0.5;
pub const GRAVITY: f32 = 9.8;
pub const DT: f32 = 0.01;
pub const FORCE_SCALE: f32 = 10.0;
pub const TRACK_LIMIT: f32 = 2.4;
pub const MAX_STEPS: u32 = 1000;
pub const OBS_DIM: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CartPoleMode {
    Easy,
    Hard,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CartPoleLane {
    pub x: f32,
    pub x_dot: f32,
    pub theta: f32,
    pub theta_dot: f32,
    pub t: u32,
    pub done: bool,
}

impl CartPoleLane {
    pub fn at_rest(x: f32, theta: f32) -> Self {
        CartPoleLane { x, x_dot: 0.0, theta, theta_dot: 0.0, t: 0, done: false }
    }

    /// `[x, ẋ, cos θ, sin θ, θ̇]`.
    pub fn observe(&self) -> [f32; OBS_DIM] {
        [self.x, self.x_dot, self.theta.cos(), self.theta.sin(), self.theta_dot]
    }

    /// Cart KE + pole KE (translation and rotation) + pole PE, with potential
    /// energy measured from the track (pivot) height.
    pub fn energy(&self) -> f64 {
        let (mc, mp, l, g) = (CART_MASS as f64, POLE_MASS as f64, POLE_HALF_LENGTH as f64, GRAVITY as f64);
        let (xd, td, th) = (self.x_dot as f64, self.theta_dot as f64, self.theta as f64);
        0.5 * (mc + mp) * xd * xd
            + mp * l * xd * td * th.cos()
            + 0.5 * (4.0 / 3.0) * mp * l * l * td * td
            + mp * g * l * th.cos()
    }

    pub fn reward(&self) -> f32 {
        (1.0 + self.theta.cos()) / 2.0
    }
}

/// Pole and cart accelerations under horizontal force `u`.
pub fn accelerations(theta: f32, theta_dot: f32, u: f32) -> (f32, f32) {
    let total = CART_MASS + POLE_MASS;
    let (s, c) = theta.sin_cos();
    let theta_acc = (GRAVITY * s + c * (-u - POLE_MASS * POLE_HALF_LENGTH * theta_dot * theta_dot * s) / total)
        / (POLE_HALF_LENGTH * (4.0 / 3.0 - POLE_MASS * c * c / total));
    let x_acc = (u + POLE_MASS * POLE_HALF_LENGTH * (theta_dot * theta_dot * s - theta_acc * c)) / total;
    (x_acc, theta_acc)
}

/// One semi-implicit Euler step, velocities first. Ignores termination.
pub fn integrate(lane: &CartPoleLane, action: f32) -> CartPoleLane {
    let u = FORCE_SCALE * action.clamp(-1.0, 1.0);
    let (x_acc, theta_acc) = accelerations(lane.theta, lane.theta_dot, u);
    let x_dot = lane.x_dot + DT * x_acc;
    let theta_dot = lane.theta_dot + DT * theta_acc;
    CartPoleLane {
        x: lane.x + DT * x_dot,
        x_dot,
        theta: lane.theta + DT * theta_dot,
        theta_dot,
        t: lane.t + 1,
        done: lane.done,
    }
}

#[derive(Clone, Debug)]
pub struct CartPole {
    pub mode: CartPoleMode,
    pub max_steps: u32,
}

impl CartPole {
    pub fn new(mode: CartPoleMode) -> Self {
        CartPole { mode, max_steps: MAX_STEPS }
    }

    pub fn initial_lane(&self, key: Key) -> CartPoleLane {
        let mut s = key.stream();
        match self.mode {
            CartPoleMode::Easy => {
                let x = s.uniform_in(-0.1, 0.1);
                let x_dot = s.uniform_in(-0.1, 0.1);
                let theta = std::f32::consts::PI + s.uniform_in(-0.1, 0.1);
                let theta_dot = s.uniform_in(-0.1, 0.1);
                CartPoleLane { x, x_dot, theta, theta_dot, t: 0, done: false }
            }
            CartPoleMode::Hard => {
                let x = s.uniform_in(-1.0, 1.0);
                let x_dot = s.uniform_in(-0.5, 0.5);
                let theta = s.uniform_in(-std::f32::consts::PI, std::f32::consts::PI);
                let theta_dot = s.uniform_in(-0.5, 0.5);
                CartPoleLane { x, x_dot, theta, theta_dot, t: 0, done: false }
            }
        }
    }

    /// Task state holding `lanes` (P×B, row-major).
    pub fn state_from_lanes(&self, pop: usize, lanes_per_member: usize, lanes: Vec<CartPoleLane>) -> Result<TaskState<Arc<Vec<CartPoleLane>>>> {
        let obs: Vec<f32> = lanes.iter().flat_map(|l| l.observe()).collect();
        Ok(TaskState {
            obs: Observation::per_member(pop, lanes_per_member, OBS_DIM, obs)?,
            extra: Arc::new(lanes),
        })
    }

    /// Advances one lane, applying the termination and reward rules.
    pub fn step_lane(&self, lane: &CartPoleLane, action: f32) -> (CartPoleLane, f32) {
        if lane.done {
            return (*lane, 0.0);
        }
        let mut next = integrate(lane, action);
        if next.x.abs() > TRACK_LIMIT {
            next.done = true;
            return (next, 0.0);
        }
        if next.t >= self.max_steps {
            next.done = true;
        }
        (next, next.reward())
    }
}

impl VectorizedTask for CartPole {
    type Extra = Arc<Vec<CartPoleLane>>;

    fn name(&self) -> &'static str {
        match self.mode {
            CartPoleMode::Easy => "cartpole_easy",
            CartPoleMode::Hard => "cartpole_hard",
        }
    }

    fn obs_dim(&self) -> usize {
        OBS_DIM
    }

    fn act_dim(&self) -> usize {
        1
    }

    fn max_steps(&self) -> usize {
        self.max_steps as usize
    }

    fn reset(&self, keys: &[Key], pop: usize) -> Result<TaskState<Self::Extra>> {
        check_keys(keys)?;
        let init: Vec<CartPoleLane> = keys.iter().map(|&k| self.initial_lane(k)).collect();
        let mut lanes = Vec::with_capacity(pop * keys.len());
        for _ in 0..pop {
            lanes.extend_from_slice(&init);
        }
        self.state_from_lanes(pop, keys.len(), lanes)
    }

    fn step(&self, state: &TaskState<Self::Extra>, actions: &Tensor) -> Result<StepResult<Self::Extra>> {
        let (p, b) = (state.pop_size(), state.lanes());
        check_actions(actions, p, b, 1)?;
        let mut lanes = Vec::with_capacity(p * b);
        let mut reward = Vec::with_capacity(p * b);
        for (lane, &a) in state.extra.iter().zip(actions.data()) {
            let (next, r) = self.step_lane(lane, a);
            lanes.push(next);
            reward.push(r);
        }
        let done = lanes.iter().map(|l| l.done).collect();
        Ok(StepResult {
            state: self.state_from_lanes(p, b, lanes)?,
            reward: Tensor::from_vec(&[p, b], reward)?,
            done,
        })
    }
}

impl Render for CartPole {
    fn render(&self, state: &TaskState<Self::Extra>, member: usize, lane: usize) -> RgbImage {
        const W: usize = 320;
        const H: usize = 160;
        let l = &state.extra[member * state.lanes() + lane];
        let mut img = RgbImage::new(W, H, [255, 255, 255]);
        let scale = W as f32 / (2.0 * (TRACK_LIMIT + 0.6));
        let track_y = 110.0;
        img.fill_rect(0, track_y as i64, W as i64 - 1, track_y as i64 + 1, [120, 120, 120]);
        for edge in [-TRACK_LIMIT, TRACK_LIMIT] {
            let ex = (W as f32 / 2.0 + edge * scale) as i64;
            img.fill_rect(ex, track_y as i64 - 10, ex + 1, track_y as i64 + 1, [200, 60, 60]);
        }
        let cx = W as f32 / 2.0 + l.x * scale;
        img.fill_rect((cx - 16.0) as i64, (track_y - 10.0) as i64, (cx + 16.0) as i64, (track_y + 2.0) as i64, [40, 40, 40]);
        let pole = 2.0 * POLE_HALF_LENGTH * scale;
        let (s, c) = l.theta.sin_cos();
        let (px, py) = (cx, track_y - 10.0);
        img.draw_line(px, py, px + pole * s, py - pole * c, 5.0, [200, 140, 60]);
        img.fill_circle(px, py, 3.0, [20, 20, 160]);
        img
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::splitrng::{new_key, split};
    use std::f32::consts::PI;

    fn single(task: &CartPole, lane: CartPoleLane) -> TaskState<Arc<Vec<CartPoleLane>>> {
        task.state_from_lanes(1, 1, vec![lane]).unwrap()
    }

    #[test]
    fn upright_rest_is_an_equilibrium() {
        let task = CartPole::new(CartPoleMode::Easy);
        let st = single(&task, CartPoleLane::at_rest(0.0, 0.0));
        let res = task.step(&st, &Tensor::zeros(&[1, 1, 1])).unwrap();
        let l = res.state.extra[0];
        assert_eq!((l.x, l.x_dot, l.theta, l.theta_dot), (0.0, 0.0, 0.0, 0.0));
        assert_eq!(res.reward.data(), &[1.0]);
    }

    #[test]
    fn hanging_rest_stays_down_with_zero_reward() {
        let task = CartPole::new(CartPoleMode::Easy);
        let mut st = single(&task, CartPoleLane::at_rest(0.0, PI));
        for _ in 0..10 {
            let res = task.step(&st, &Tensor::zeros(&[1, 1, 1])).unwrap();
            assert!(res.reward.data()[0] < 1e-6);
            st = res.state;
        }
        assert!((st.extra[0].theta - PI).abs() < 1e-4);
    }

    #[test]
    fn horizontal_pole_angular_acceleration() {
        let (_, theta_acc) = accelerations(PI / 2.0, 0.0, 0.0);
        assert!((theta_acc - 14.7).abs() < 1e-4, "{theta_acc}");
        let next = integrate(&CartPoleLane::at_rest(0.0, PI / 2.0), 0.0);
        assert!((next.theta_dot - DT * 14.7).abs() < 1e-6);
    }

    #[test]
    fn done_lanes_are_frozen() {
        let task = CartPole::new(CartPoleMode::Easy);
        let mut lane = CartPoleLane::at_rest(2.39, 0.3);
        lane.x_dot = 5.0;
        let st = single(&task, lane);
        let res = task.step(&st, &Tensor::full(&[1, 1, 1], 1.0)).unwrap();
        assert!(res.done[0]);
        assert_eq!(res.reward.data(), &[0.0]);
        let again = task.step(&res.state, &Tensor::full(&[1, 1, 1], -1.0)).unwrap();
        assert_eq!(again.reward.data(), &[0.0]);
        assert_eq!(again.state.extra[0], res.state.extra[0]);
    }

    #[test]
    fn episode_ends_at_max_steps() {
        let task = CartPole::new(CartPoleMode::Easy);
        let mut lane = CartPoleLane::at_rest(0.0, 0.0);
        lane.t = MAX_STEPS - 1;
        let res = task.step(&single(&task, lane), &Tensor::zeros(&[1, 1, 1])).unwrap();
        assert!(res.done[0]);
        assert_eq!(res.reward.data(), &[1.0]);
    }

    #[test]
    fn reset_shares_lanes_across_population() {
        let task = CartPole::new(CartPoleMode::Easy);
        let keys = split(new_key(1), 2).unwrap();
        let st = task.reset(&keys, 8).unwrap();
        assert_eq!(st.obs.shape(), [8, 2, 5]);
        for j in 0..2 {
            for i in 1..8 {
                assert_eq!(st.obs.lane(i, j), st.obs.lane(0, j));
            }
        }
        assert_ne!(st.obs.lane(0, 0), st.obs.lane(0, 1));
        let again = task.reset(&keys, 8).unwrap();
        assert_eq!(again.obs.to_tensor(), st.obs.to_tensor());
        assert!(task.reset(&[], 8).is_err());
    }

    #[test]
    fn easy_and_hard_initial_ranges() {
        let easy = CartPole::new(CartPoleMode::Easy);
        let hard = CartPole::new(CartPoleMode::Hard);
        let keys = split(new_key(2), 1000).unwrap();
        let (mut pos, mut neg) = (false, false);
        for &k in &keys {
            let e = easy.initial_lane(k);
            assert!((e.theta - PI).abs() <= 0.1 + 1e-6);
            for v in [e.x, e.x_dot, e.theta_dot] {
                assert!(v.abs() <= 0.1);
            }
            let h = hard.initial_lane(k);
            assert!(h.theta.abs() <= PI && h.x.abs() <= 1.0 && h.x_dot.abs() <= 0.5 && h.theta_dot.abs() <= 0.5);
            pos |= h.theta > 0.0;
            neg |= h.theta < 0.0;
        }
        assert!(pos && neg);
    }

    #[test]
    fn step_is_pure_and_checks_shapes() {
        let task = CartPole::new(CartPoleMode::Hard);
        let st = task.reset(&split(new_key(3), 3).unwrap(), 2).unwrap();
        let a = Tensor::from_vec(&[2, 3, 1], vec![0.5, -0.2, 1.0, 0.0, 0.3, -1.0]).unwrap();
        let r1 = task.step(&st, &a).unwrap();
        let r2 = task.step(&st, &a).unwrap();
        assert_eq!(r1.reward, r2.reward);
        assert_eq!(r1.state.extra, r2.state.extra);
        assert!(task.step(&st, &Tensor::zeros(&[2, 3, 2])).is_err());
    }

    #[test]
    fn passive_energy_drift_is_small() {
        let task = CartPole::new(CartPoleMode::Easy);
        let mut worst = 0.0f64;
        for k in split(new_key(8), 1000).unwrap() {
            let start = task.initial_lane(k);
            let e0 = start.energy();
            let mut lane = start;
            for _ in 0..100 {
                lane = integrate(&lane, 0.0);
                worst = worst.max(((lane.energy() - e0) / e0).abs());
            }
        }
        assert!(worst < 0.01, "relative drift {worst}");
    }
}
