//! PGPE with symmetric sampling, rank-based fitness shaping and a choice of
//! center optimizer (ClipUp, Adam or plain gradient ascent).
//!
//! Gradient estimates, for K = P/2 mirrored pairs μ ± ε_i:
//!
//! ```text
//! g_μ   = 1/K Σ_i (f⁺_i − f⁻_i)/2 · ε_i
//! b     = 1/K Σ_i (f⁺_i + f⁻_i)/2
//! g_σ_j = 1/K Σ_i ((f⁺_i + f⁻_i)/2 − b) · (ε_ij² − σ_j²)/σ_j
//! ```
//!
//! The center follows the optimizer step on g_μ. σ takes a plain ascent step
//! on g_σ and is then clamped to within `sigma_max_change` of its old value.

use crate::algo::Algorithm;
use crate::error::{Error, Result};
use crate::splitrng::{fold_in, normal, Key};
use crate::tensor::{FitnessVector, PopulationParams, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Shaping {
    CenteredRank,
    Raw,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Optimizer {
    ClipUp,
    Adam,
    Sgd,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PgpeConfig {
    pub pop_size: usize,
    pub sigma_init: f32,
    pub center_lr: f32,
    pub sigma_lr: f32,
    pub max_speed: f32,
    pub momentum: f32,
    pub sigma_max_change: f32,
    pub shaping: Shaping,
    pub optimizer: Optimizer,
    /// Every coordinate of the initial center.
    pub center_init: f32,
}

impl Default for PgpeConfig {
    fn default() -> Self {
        PgpeConfig {
            pop_size: 64,
            sigma_init: 0.1,
            center_lr: 0.01,
            sigma_lr: 0.03,
            max_speed: 0.02,
            momentum: 0.9,
            sigma_max_change: 0.2,
            shaping: Shaping::CenteredRank,
            optimizer: Optimizer::ClipUp,
            center_init: 0.0,
        }
    }
}

impl PgpeConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.pop_size < 2 || self.pop_size % 2 != 0 {
            return bad(format!("pop_size must be even and >= 2, got {}", self.pop_size));
        }
        if !(self.sigma_init > 0.0) {
            return bad(format!("sigma_init must be > 0, got {}", self.sigma_init));
        }
        if !(self.center_lr > 0.0) {
            return bad(format!("center_lr must be > 0, got {}", self.center_lr));
        }
        if !(self.sigma_lr >= 0.0) {
            return bad(format!("sigma_lr must be >= 0, got {}", self.sigma_lr));
        }
        if !(self.max_speed > 0.0) {
            return bad(format!("max_speed must be > 0, got {}", self.max_speed));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum must be in [0, 1), got {}", self.momentum));
        }
        if !(self.sigma_max_change > 0.0 && self.sigma_max_change < 1.0) {
            return bad(format!("sigma_max_change must be in (0, 1), got {}", self.sigma_max_change));
        }
        if !self.center_init.is_finite() {
            return bad("center_init must be finite".into());
        }
        Ok(())
    }
}

/// Ranks (ascending fitness, ties by index) mapped affinely onto [−0.5, 0.5].
pub fn centered_ranks(fitness: &[f32]) -> Result<Vec<f32>> {
    let n = fitness.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!("centered_ranks needs >= 2 values, got {n}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| fitness[a].total_cmp(&fitness[b]));
    let mut out = vec![0.0; n];
    let scale = 1.0 / (n - 1) as f32;
    for (rank, &i) in order.iter().enumerate() {
        out[i] = rank as f32 * scale - 0.5;
    }
    Ok(out)
}

/// Mirrored sample around `mu`: row 2i = μ + ε_i, row 2i+1 = μ − ε_i with
/// ε_i ~ N(0, diag(σ²)). Returns the population and the K×D perturbations.
pub fn symmetric_sample(mu: &[f32], sigma: &[f32], key: Key, pairs: usize) -> (PopulationParams, Tensor) {
    let d = mu.len();
    let mut eps = normal(key, &[pairs, d]);
    for row in eps.data_mut().chunks_mut(d.max(1)) {
        for (e, &s) in row.iter_mut().zip(sigma) {
            *e *= s;
        }
    }
    let mut data = Vec::with_capacity(2 * pairs * d);
    for row in eps.data().chunks(d.max(1)).take(pairs) {
        data.extend(mu.iter().zip(row).map(|(&m, &e)| m + e));
        data.extend(mu.iter().zip(row).map(|(&m, &e)| m - e));
    }
    let pop = PopulationParams::new(Tensor::from_vec(&[2 * pairs, d], data).expect("sized above"))
        .expect("rank 2");
    (pop, eps)
}

/// Center and σ gradient estimates from K mirrored pairs.
pub fn pgpe_gradients(
    eps: &Tensor,
    f_plus: &[f32],
    f_minus: &[f32],
    sigma: &[f32],
) -> Result<(Vec<f32>, Vec<f32>)> {
    let d = sigma.len();
    let k = f_plus.len();
    if eps.shape() != [k, d] || f_minus.len() != k || k == 0 {
        return Err(Error::Shape(format!(
            "pgpe_gradients: eps {:?}, {} f+, {} f-, {} sigma",
            eps.shape(),
            k,
            f_minus.len(),
            d
        )));
    }
    let inv_k = 1.0 / k as f32;
    let baseline = f_plus.iter().zip(f_minus).map(|(&p, &m)| (p + m) / 2.0).sum::<f32>() * inv_k;
    let mut g_mu = vec![0.0f32; d];
    let mut g_sigma = vec![0.0f32; d];
    for i in 0..k {
        let e = eps.outer(i);
        let diff = (f_plus[i] - f_minus[i]) / 2.0;
        let avg = (f_plus[i] + f_minus[i]) / 2.0 - baseline;
        for j in 0..d {
            g_mu[j] += diff * e[j];
            g_sigma[j] += avg * (e[j] * e[j] - sigma[j] * sigma[j]) / sigma[j];
        }
    }
    for j in 0..d {
        g_mu[j] *= inv_k;
        g_sigma[j] *= inv_k;
    }
    Ok((g_mu, g_sigma))
}

fn l2(v: &[f32]) -> f32 {
    v.iter().map(|x| x * x).sum::<f32>().sqrt()
}

/// ClipUp: normalized-gradient step with momentum and a velocity norm cap.
/// Returns the new velocity, which is also the center update.
pub fn clipup_step(velocity: &[f32], g: &[f32], lr: f32, momentum: f32, max_speed: f32) -> Vec<f32> {
    let norm = l2(g);
    let scale = if norm > 0.0 { lr / norm } else { 0.0 };
    let mut v: Vec<f32> = velocity.iter().zip(g).map(|(&v, &gi)| momentum * v + scale * gi).collect();
    let speed = l2(&v);
    if speed > max_speed {
        let shrink = max_speed / speed;
        v.iter_mut().for_each(|x| *x *= shrink);
    }
    v
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<f32>,
    pub v: Vec<f32>,
    pub t: u32,
    pub beta1: f32,
    pub beta2: f32,
    pub epsilon: f32,
}

impl AdamState {
    pub fn new(dim: usize) -> Self {
        AdamState { m: vec![0.0; dim], v: vec![0.0; dim], t: 0, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// Bias-corrected Adam step for ascent: the returned Δ is added to the center.
pub fn adam_step(state: &mut AdamState, g: &[f32], lr: f32) -> Vec<f32> {
    state.t += 1;
    let c1 = 1.0 - state.beta1.powi(state.t as i32);
    let c2 = 1.0 - state.beta2.powi(state.t as i32);
    let mut delta = vec![0.0; g.len()];
    for j in 0..g.len() {
        state.m[j] = state.beta1 * state.m[j] + (1.0 - state.beta1) * g[j];
        state.v[j] = state.beta2 * state.v[j] + (1.0 - state.beta2) * g[j] * g[j];
        let m_hat = state.m[j] / c1;
        let v_hat = state.v[j] / c2;
        delta[j] = lr * m_hat / (v_hat.sqrt() + state.epsilon);
    }
    delta
}

#[derive(Clone, Debug)]
pub struct Pgpe {
    config: PgpeConfig,
    mu: Vec<f32>,
    sigma: Vec<f32>,
    velocity: Vec<f32>,
    adam: AdamState,
    /// Perturbations of the outstanding ask.
    pending: Option<Tensor>,
    key: Key,
    iteration: u64,
    best_score: f32,
    best_member: Vec<f32>,
}

impl Pgpe {
    pub fn new(config: PgpeConfig, dim: usize, key: Key) -> Result<Self> {
        config.validate()?;
        if dim == 0 {
            return Err(Error::InvalidArgument("PGPE needs dim >= 1".into()));
        }
        let mu = vec![config.center_init; dim];
        Ok(Pgpe {
            sigma: vec![config.sigma_init; dim],
            velocity: vec![0.0; dim],
            adam: AdamState::new(dim),
            pending: None,
            key,
            iteration: 0,
            best_score: f32::NEG_INFINITY,
            best_member: mu.clone(),
            mu,
            config,
        })
    }

    /// Replaces the initial center.
    pub fn with_center(mut self, mu: Vec<f32>) -> Result<Self> {
        if mu.len() != self.mu.len() {
            return Err(Error::Shape(format!("center of length {} for dim {}", mu.len(), self.mu.len())));
        }
        self.best_member = mu.clone();
        self.mu = mu;
        Ok(self)
    }

    pub fn config(&self) -> &PgpeConfig {
        &self.config
    }

    pub fn center(&self) -> &[f32] {
        &self.mu
    }

    pub fn sigma(&self) -> &[f32] {
        &self.sigma
    }

    pub fn velocity(&self) -> &[f32] {
        &self.velocity
    }

    /// Best raw fitness seen so far and the member that achieved it.
    pub fn best_member(&self) -> (f32, &[f32]) {
        (self.best_score, &self.best_member)
    }
}

impl Algorithm for Pgpe {
    fn name(&self) -> &'static str {
        "pgpe"
    }

    fn pop_size(&self) -> usize {
        self.config.pop_size
    }

    fn dim(&self) -> usize {
        self.mu.len()
    }

    fn ask(&mut self) -> Result<PopulationParams> {
        if self.pending.is_some() {
            return Err(Error::Protocol("ask called twice without tell".into()));
        }
        let key = fold_in(self.key, self.iteration);
        let (pop, eps) = symmetric_sample(&self.mu, &self.sigma, key, self.config.pop_size / 2);
        self.pending = Some(eps);
        Ok(pop)
    }

    fn tell(&mut self, fitness: &FitnessVector) -> Result<()> {
        if self.pending.is_none() {
            return Err(Error::Protocol("tell without a pending ask".into()));
        }
        if fitness.len() != self.config.pop_size {
            return Err(Error::Protocol(format!(
                "tell got {} fitness values for population {}",
                fitness.len(),
                self.config.pop_size
            )));
        }
        fitness.ensure_finite()?;
        let eps = self.pending.take().expect("checked above");
        let raw = fitness.scores();

        let best = fitness.argmax();
        if raw[best] > self.best_score {
            self.best_score = raw[best];
            let pair = eps.outer(best / 2);
            let sign = if best % 2 == 0 { 1.0 } else { -1.0 };
            self.best_member = self.mu.iter().zip(pair).map(|(&m, &e)| m + sign * e).collect();
        }

        let all_equal = raw.iter().all(|&v| v == raw[0]);
        let shaped = match self.config.shaping {
            Shaping::CenteredRank if all_equal => vec![0.0; raw.len()],
            Shaping::CenteredRank => centered_ranks(raw)?,
            Shaping::Raw => raw.to_vec(),
        };
        let f_plus: Vec<f32> = shaped.iter().step_by(2).copied().collect();
        let f_minus: Vec<f32> = shaped.iter().skip(1).step_by(2).copied().collect();
        let (g_mu, g_sigma) = pgpe_gradients(&eps, &f_plus, &f_minus, &self.sigma)?;

        let delta = match self.config.optimizer {
            Optimizer::ClipUp => {
                self.velocity = clipup_step(
                    &self.velocity,
                    &g_mu,
                    self.config.center_lr,
                    self.config.momentum,
                    self.config.max_speed,
                );
                self.velocity.clone()
            }
            Optimizer::Adam => adam_step(&mut self.adam, &g_mu, self.config.center_lr),
            Optimizer::Sgd => g_mu.iter().map(|g| self.config.center_lr * g).collect(),
        };
        for (m, d) in self.mu.iter_mut().zip(&delta) {
            *m += d;
        }

        let c = self.config.sigma_max_change;
        for (s, g) in self.sigma.iter_mut().zip(&g_sigma) {
            let proposed = *s + self.config.sigma_lr * g;
            let clamped = proposed.clamp((1.0 - c) * *s, (1.0 + c) * *s);
            *s = clamped.max(f32::MIN_POSITIVE);
        }
        self.iteration += 1;
        Ok(())
    }

    fn best_params(&self) -> Vec<f32> {
        self.mu.clone()
    }

    fn sigma_mean(&self) -> f32 {
        self.sigma.iter().sum::<f32>() / self.sigma.len() as f32
    }

    fn iteration(&self) -> u64 {
        self.iteration
    }
}
