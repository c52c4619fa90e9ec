//! Water world: agents steer through a unit square full of drifting food and
//! poison items, sensing them with 16 range-limited rays.
//!
//! In single-agent mode every (member, lane) pair owns an arena. In
//! multi-agent mode lane j holds one arena shared by all P members, so agent i
//! of that arena is driven by member i.

use std::f32::consts::TAU;
use std::sync::Arc;

use crate::error::Result;
use crate::image::RgbImage;
use crate::splitrng::{fold_in, Key, KeyStream};
use crate::task::{check_actions, check_keys, Render, StepResult, TaskState, VectorizedTask};
use crate::tensor::{Observation, Tensor};

pub const NUM_FOOD: usize = 25;
pub const NUM_POISON: usize = 25;
pub const AGENT_RADIUS: f32 = 0.03;
pub const ITEM_RADIUS: f32 = 0.016;
pub const CONTACT_DIST: f32 = AGENT_RADIUS + ITEM_RADIUS;
pub const ITEM_SPEED: f32 = 0.005;
pub const AGENT_MAX_SPEED: f32 = 0.01;
pub const AGENT_ACCEL: f32 = 0.002;
pub const DRAG: f32 = 0.95;
pub const NUM_RAYS: usize = 16;
pub const RAY_RANGE: f32 = 0.21;
pub const MAX_STEPS: u32 = 500;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ItemKind {
    Food,
    Poison,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Item {
    pub kind: ItemKind,
    pub pos: [f32; 2],
    pub vel: [f32; 2],
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Agent {
    pub pos: [f32; 2],
    pub vel: [f32; 2],
}

#[derive(Clone, Debug, PartialEq)]
pub struct Arena {
    pub agents: Vec<Agent>,
    pub items: Vec<Item>,
    pub t: u32,
    pub done: bool,
    /// Source of respawn randomness.
    pub key: Key,
}

impl Arena {
    pub fn food_count(&self) -> usize {
        self.items.iter().filter(|it| it.kind == ItemKind::Food).count()
    }

    pub fn poison_count(&self) -> usize {
        self.items.len() - self.food_count()
    }
}

fn random_item(kind: ItemKind, s: &mut KeyStream) -> Item {
    let pos = [s.next_f32(), s.next_f32()];
    let angle = s.next_f32() * TAU;
    let (sn, cs) = angle.sin_cos();
    Item { kind, pos, vel: [ITEM_SPEED * cs, ITEM_SPEED * sn] }
}

/// Distance along a unit ray from `p` to the first hit on a circle, if any.
fn ray_circle(p: [f32; 2], u: [f32; 2], center: [f32; 2], radius: f32) -> Option<f32> {
    let d = [center[0] - p[0], center[1] - p[1]];
    let dist2 = d[0] * d[0] + d[1] * d[1];
    let r2 = radius * radius;
    if dist2 <= r2 {
        return Some(0.0);
    }
    let proj = d[0] * u[0] + d[1] * u[1];
    if proj <= 0.0 {
        return None;
    }
    let perp2 = dist2 - proj * proj;
    if perp2 > r2 {
        return None;
    }
    Some(proj - (r2 - perp2).sqrt())
}

fn ray_wall(p: [f32; 2], u: [f32; 2]) -> f32 {
    let mut t = f32::INFINITY;
    for axis in 0..2 {
        if u[axis] > 1e-9 {
            t = t.min((1.0 - p[axis]) / u[axis]);
        } else if u[axis] < -1e-9 {
            t = t.min(-p[axis] / u[axis]);
        }
    }
    t.max(0.0)
}

fn ray_dirs() -> [[f32; 2]; NUM_RAYS] {
    std::array::from_fn(|k| {
        let (s, c) = (TAU * k as f32 / NUM_RAYS as f32).sin_cos();
        [c, s]
    })
}

fn normalized(hit: f32) -> f32 {
    if hit < RAY_RANGE {
        hit / RAY_RANGE
    } else {
        1.0
    }
}

fn within_reach(p: [f32; 2], q: [f32; 2], radius: f32) -> bool {
    let reach = RAY_RANGE + radius;
    let (dx, dy) = (q[0] - p[0], q[1] - p[1]);
    dx * dx + dy * dy <= reach * reach
}

/// Sensor readings for one agent: per ray the normalized distance to the
/// nearest food, poison and wall (plus nearest other agent when
/// `multi_agent`), followed by the agent's velocity.
pub fn sensor_scan(arena: &Arena, agent: usize, multi_agent: bool, out: &mut Vec<f32>) {
    let me = arena.agents[agent];
    let p = me.pos;
    let near_items: Vec<&Item> = arena.items.iter().filter(|it| within_reach(p, it.pos, ITEM_RADIUS)).collect();
    let near_agents: Vec<[f32; 2]> = if multi_agent {
        arena
            .agents
            .iter()
            .enumerate()
            .filter(|&(j, a)| j != agent && within_reach(p, a.pos, AGENT_RADIUS))
            .map(|(_, a)| a.pos)
            .collect()
    } else {
        Vec::new()
    };
    for u in ray_dirs() {
        let (mut food, mut poison) = (f32::INFINITY, f32::INFINITY);
        for it in &near_items {
            if let Some(hit) = ray_circle(p, u, it.pos, ITEM_RADIUS) {
                match it.kind {
                    ItemKind::Food => food = food.min(hit),
                    ItemKind::Poison => poison = poison.min(hit),
                }
            }
        }
        out.push(normalized(food));
        out.push(normalized(poison));
        out.push(normalized(ray_wall(p, u)));
        if multi_agent {
            let mut other = f32::INFINITY;
            for &q in &near_agents {
                if let Some(hit) = ray_circle(p, u, q, AGENT_RADIUS) {
                    other = other.min(hit);
                }
            }
            out.push(normalized(other));
        }
    }
    out.push(me.vel[0]);
    out.push(me.vel[1]);
}

/// Scales `v` down to at most `max` in length.
pub fn clamp_speed(v: [f32; 2], max: f32) -> [f32; 2] {
    let speed = (v[0] * v[0] + v[1] * v[1]).sqrt();
    if speed > max {
        [v[0] * max / speed, v[1] * max / speed]
    } else {
        v
    }
}

fn advance_item(it: &mut Item) {
    for axis in 0..2 {
        let mut x = it.pos[axis] + it.vel[axis];
        if x < 0.0 {
            x = -x;
            it.vel[axis] = -it.vel[axis];
        } else if x > 1.0 {
            x = 2.0 - x;
            it.vel[axis] = -it.vel[axis];
        }
        it.pos[axis] = x.clamp(0.0, 1.0);
    }
}

/// Advances one arena given one action per agent; returns per-agent reward.
pub fn step_arena(arena: &Arena, actions: &[[f32; 2]]) -> (Arena, Vec<f32>) {
    let mut next = arena.clone();
    let mut rewards = vec![0.0f32; arena.agents.len()];
    if arena.done {
        return (next, rewards);
    }
    for (agent, a) in next.agents.iter_mut().zip(actions) {
        let ax = a[0].clamp(-1.0, 1.0);
        let ay = a[1].clamp(-1.0, 1.0);
        agent.vel = clamp_speed([DRAG * agent.vel[0] + AGENT_ACCEL * ax, DRAG * agent.vel[1] + AGENT_ACCEL * ay], AGENT_MAX_SPEED);
        agent.pos = [(agent.pos[0] + agent.vel[0]).clamp(0.0, 1.0), (agent.pos[1] + agent.vel[1]).clamp(0.0, 1.0)];
    }
    next.t += 1;
    let step_key = fold_in(arena.key, next.t as u64);
    for (idx, it) in next.items.iter_mut().enumerate() {
        advance_item(it);
        let eater = next.agents.iter().position(|ag| {
            let (dx, dy) = (ag.pos[0] - it.pos[0], ag.pos[1] - it.pos[1]);
            dx * dx + dy * dy < CONTACT_DIST * CONTACT_DIST
        });
        if let Some(a) = eater {
            rewards[a] += match it.kind {
                ItemKind::Food => 1.0,
                ItemKind::Poison => -1.0,
            };
            *it = random_item(it.kind, &mut fold_in(step_key, idx as u64).stream());
        }
    }
    next.done = next.t >= MAX_STEPS;
    (next, rewards)
}

#[derive(Clone, Debug)]
pub struct WaterWorld {
    pub multi_agent: bool,
}

impl WaterWorld {
    pub fn single() -> Self {
        WaterWorld { multi_agent: false }
    }

    pub fn multi() -> Self {
        WaterWorld { multi_agent: true }
    }

    /// Arena with `agents` agents drawn from `key`.
    pub fn new_arena(&self, key: Key, agents: usize) -> Arena {
        let mut s = key.stream();
        let agents = (0..agents).map(|_| Agent { pos: [s.next_f32(), s.next_f32()], vel: [0.0, 0.0] }).collect();
        let items = (0..NUM_FOOD + NUM_POISON)
            .map(|i| random_item(if i < NUM_FOOD { ItemKind::Food } else { ItemKind::Poison }, &mut s))
            .collect();
        Arena { agents, items, t: 0, done: false, key: fold_in(key, 0x5EED) }
    }

    fn arena_index(&self, lanes: usize, member: usize, lane: usize) -> (usize, usize) {
        if self.multi_agent {
            (lane, member)
        } else {
            (member * lanes + lane, 0)
        }
    }

    /// Builds a task state from arenas laid out as in `reset`.
    pub fn state_from_arenas(&self, pop: usize, lanes: usize, arenas: Vec<Arena>) -> Result<TaskState<Arc<Vec<Arena>>>> {
        let dim = self.obs_dim();
        let mut obs = Vec::with_capacity(pop * lanes * dim);
        for i in 0..pop {
            for j in 0..lanes {
                let (a, agent) = self.arena_index(lanes, i, j);
                sensor_scan(&arenas[a], agent, self.multi_agent, &mut obs);
            }
        }
        Ok(TaskState { obs: Observation::per_member(pop, lanes, dim, obs)?, extra: Arc::new(arenas) })
    }
}

impl VectorizedTask for WaterWorld {
    type Extra = Arc<Vec<Arena>>;

    fn name(&self) -> &'static str {
        if self.multi_agent {
            "waterworld_ma"
        } else {
            "waterworld"
        }
    }

    fn obs_dim(&self) -> usize {
        NUM_RAYS * if self.multi_agent { 4 } else { 3 } + 2
    }

    fn act_dim(&self) -> usize {
        2
    }

    fn max_steps(&self) -> usize {
        MAX_STEPS as usize
    }

    fn separable(&self) -> bool {
        !self.multi_agent
    }

    fn reset(&self, keys: &[Key], pop: usize) -> Result<TaskState<Self::Extra>> {
        check_keys(keys)?;
        let arenas = if self.multi_agent {
            keys.iter().map(|&k| self.new_arena(k, pop)).collect()
        } else {
            let lanes: Vec<Arena> = keys.iter().map(|&k| self.new_arena(k, 1)).collect();
            (0..pop).flat_map(|_| lanes.iter().cloned()).collect()
        };
        self.state_from_arenas(pop, keys.len(), arenas)
    }

    fn step(&self, state: &TaskState<Self::Extra>, actions: &Tensor) -> Result<StepResult<Self::Extra>> {
        let (p, b) = (state.pop_size(), state.lanes());
        check_actions(actions, p, b, 2)?;
        let act = |i: usize, j: usize| {
            let a = &actions.data()[(i * b + j) * 2..][..2];
            [a[0], a[1]]
        };
        let mut reward = vec![0.0f32; p * b];
        let arenas: Vec<Arena> = if self.multi_agent {
            (0..b)
                .map(|j| {
                    let acts: Vec<[f32; 2]> = (0..p).map(|i| act(i, j)).collect();
                    let (next, r) = step_arena(&state.extra[j], &acts);
                    for (i, ri) in r.into_iter().enumerate() {
                        reward[i * b + j] = ri;
                    }
                    next
                })
                .collect()
        } else {
            state
                .extra
                .iter()
                .enumerate()
                .map(|(idx, arena)| {
                    let (next, r) = step_arena(arena, &[act(idx / b, idx % b)]);
                    reward[idx] = r[0];
                    next
                })
                .collect()
        };
        let done = (0..p * b).map(|idx| arenas[self.arena_index(b, idx / b, idx % b).0].done).collect();
        Ok(StepResult {
            state: self.state_from_arenas(p, b, arenas)?,
            reward: Tensor::from_vec(&[p, b], reward)?,
            done,
        })
    }
}

impl Render for WaterWorld {
    fn render(&self, state: &TaskState<Self::Extra>, member: usize, lane: usize) -> RgbImage {
        const SIDE: usize = 256;
        let (a, me) = self.arena_index(state.lanes(), member, lane);
        let arena = &state.extra[a];
        let s = SIDE as f32;
        let mut img = RgbImage::new(SIDE, SIDE, [245, 245, 250]);
        for it in &arena.items {
            let c = match it.kind {
                ItemKind::Food => [40, 170, 60],
                ItemKind::Poison => [210, 50, 50],
            };
            img.fill_circle(it.pos[0] * s, (1.0 - it.pos[1]) * s, ITEM_RADIUS * s, c);
        }
        for (idx, ag) in arena.agents.iter().enumerate() {
            let c = if idx == me { [30, 60, 200] } else { [150, 150, 170] };
            img.fill_circle(ag.pos[0] * s, (1.0 - ag.pos[1]) * s, AGENT_RADIUS * s, c);
        }
        img
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::splitrng::{new_key, split};

    fn lone_agent(pos: [f32; 2], items: Vec<Item>) -> Arena {
        Arena { agents: vec![Agent { pos, vel: [0.0, 0.0] }], items, t: 0, done: false, key: new_key(0) }
    }

    #[test]
    fn empty_arena_center_sees_nothing() {
        let mut obs = vec![];
        sensor_scan(&lone_agent([0.5, 0.5], vec![]), 0, false, &mut obs);
        assert_eq!(obs.len(), 50);
        for k in 0..NUM_RAYS {
            assert_eq!(obs[3 * k], 1.0);
            assert_eq!(obs[3 * k + 1], 1.0);
            assert_eq!(obs[3 * k + 2], 1.0);
        }
    }

    #[test]
    fn downward_wall_ray() {
        let mut obs = vec![];
        sensor_scan(&lone_agent([0.5, 0.1], vec![]), 0, false, &mut obs);
        let down = 3 * NUM_RAYS / 4;
        assert!((obs[3 * down + 2] - 0.1 / 0.21).abs() < 1e-5, "{}", obs[3 * down + 2]);
    }

    #[test]
    fn ray_hits_item_ahead() {
        let food = Item { kind: ItemKind::Food, pos: [0.6, 0.5], vel: [0.0, 0.0] };
        let mut obs = vec![];
        sensor_scan(&lone_agent([0.5, 0.5], vec![food]), 0, false, &mut obs);
        assert!((obs[0] - (0.1 - ITEM_RADIUS) / RAY_RANGE).abs() < 1e-5);
        assert_eq!(obs[1], 1.0);
        assert_eq!(obs[3 * (NUM_RAYS / 2)], 1.0);
    }

    #[test]
    fn multi_agent_obs_dim_and_other_channel() {
        let task = WaterWorld::multi();
        let mut arena = lone_agent([0.5, 0.5], vec![]);
        arena.agents.push(Agent { pos: [0.5, 0.6], vel: [0.0, 0.0] });
        let mut obs = vec![];
        sensor_scan(&arena, 0, true, &mut obs);
        assert_eq!(obs.len(), task.obs_dim());
        assert_eq!(task.obs_dim(), 66);
        let up = NUM_RAYS / 4;
        assert!((obs[4 * up + 3] - (0.1 - AGENT_RADIUS) / RAY_RANGE).abs() < 1e-5);
    }

    #[test]
    fn scripted_agent_eats_food() {
        let gap = 0.04f32;
        let food = Item { kind: ItemKind::Food, pos: [0.3 + CONTACT_DIST + gap, 0.5], vel: [0.0, 0.0] };
        let mut arena = lone_agent([0.3, 0.5], vec![food]);
        let mut expected_steps = 0;
        let (mut x, mut v) = (0.0f64, 0.0f64);
        while x < gap as f64 {
            v = (0.95 * v + 0.002).min(0.01);
            x += v;
            expected_steps += 1;
        }
        let mut total = 0.0;
        for step in 1..=expected_steps {
            let (next, r) = step_arena(&arena, &[[1.0, 0.0]]);
            total += r[0];
            arena = next;
            if step < expected_steps {
                assert_eq!(total, 0.0, "ate early at step {step}");
            }
        }
        assert_eq!(total, 1.0);
        assert_eq!(arena.items.len(), 1);
        assert_eq!(arena.food_count(), 1);
    }

    #[test]
    fn conservation_and_bounds_over_an_episode() {
        let task = WaterWorld::single();
        let keys = split(new_key(4), 2).unwrap();
        let mut st = task.reset(&keys, 3).unwrap();
        let mut s = new_key(5).stream();
        for _ in 0..MAX_STEPS {
            let acts: Vec<f32> = (0..3 * 2 * 2).map(|_| s.uniform_in(-1.0, 1.0)).collect();
            let res = task.step(&st, &Tensor::from_vec(&[3, 2, 2], acts).unwrap()).unwrap();
            for arena in res.state.extra.iter() {
                assert_eq!((arena.food_count(), arena.poison_count()), (NUM_FOOD, NUM_POISON));
                for p in arena.agents.iter().map(|a| a.pos).chain(arena.items.iter().map(|it| it.pos)) {
                    assert!((0.0..=1.0).contains(&p[0]) && (0.0..=1.0).contains(&p[1]));
                }
            }
            for &r in res.reward.data() {
                assert_eq!(r.fract(), 0.0);
                assert!(r.abs() <= (NUM_FOOD + NUM_POISON) as f32);
            }
            for v in res.state.obs.to_tensor().data().chunks(50) {
                assert!(v[..48].iter().all(|x| (0.0..=1.0).contains(x)));
            }
            st = res.state;
        }
        assert!(st.extra.iter().all(|a| a.done));
    }

    #[test]
    fn no_contact_no_reward() {
        let far = Item { kind: ItemKind::Poison, pos: [0.9, 0.9], vel: [0.0, 0.0] };
        let (_, r) = step_arena(&lone_agent([0.1, 0.1], vec![far]), &[[0.0, 0.0]]);
        assert_eq!(r, vec![0.0]);
    }

    #[test]
    fn single_agent_reset_shares_lanes_and_is_deterministic() {
        let task = WaterWorld::single();
        let keys = split(new_key(6), 2).unwrap();
        let st = task.reset(&keys, 4).unwrap();
        assert_eq!(st.obs.shape(), [4, 2, 50]);
        for i in 1..4 {
            assert_eq!(st.obs.lane(i, 1), st.obs.lane(0, 1));
        }
        let acts = Tensor::full(&[4, 2, 2], 0.5);
        let a = task.step(&st, &acts).unwrap();
        let b = task.step(&task.reset(&keys, 4).unwrap(), &acts).unwrap();
        assert_eq!(a.state.extra, b.state.extra);
        assert_eq!(a.state.obs.to_tensor(), b.state.obs.to_tensor());
    }

    #[test]
    fn multi_agent_shares_one_arena() {
        let task = WaterWorld::multi();
        assert!(!task.separable());
        let st = task.reset(&[new_key(7)], 16).unwrap();
        assert_eq!(st.extra.len(), 1);
        assert_eq!(st.extra[0].agents.len(), 16);
        assert_eq!(st.obs.shape(), [16, 1, 66]);
        let res = task.step(&st, &Tensor::zeros(&[16, 1, 2])).unwrap();
        assert_eq!(res.reward.shape(), &[16, 1]);
        assert_eq!(res.state.extra[0].items.len(), NUM_FOOD + NUM_POISON);
    }

    #[test]
    fn lowest_index_agent_eats_first() {
        let food = Item { kind: ItemKind::Food, pos: [0.5, 0.5], vel: [0.0, 0.0] };
        let mut arena = lone_agent([0.5, 0.51], vec![food]);
        arena.agents.push(Agent { pos: [0.5, 0.49], vel: [0.0, 0.0] });
        let (_, r) = step_arena(&arena, &[[0.0, 0.0], [0.0, 0.0]]);
        assert_eq!(r, vec![1.0, 0.0]);
    }
}
