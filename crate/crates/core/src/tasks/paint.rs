//! Image approximation with translucent triangles. A genome holds 50
//! triangles of 10 values each (three xy vertices in canvas units, then r, g,
//! b, alpha); the single-step reward is the negative mean squared error of the
//! rendering against a target.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::image::RgbImage;
use crate::splitrng::Key;
use crate::task::{check_actions, check_keys, Render, StepResult, TaskState, VectorizedTask};
use crate::tensor::{Observation, Tensor};

pub const TRIANGLES: usize = 50;
pub const VALUES_PER_TRIANGLE: usize = 10;
pub const GENOME_LEN: usize = TRIANGLES * VALUES_PER_TRIANGLE;

fn edge(a: (f32, f32), b: (f32, f32), p: (f32, f32)) -> f32 {
    (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0)
}

/// Renders a genome (values clamped to [0, 1]) onto a white h×w×3 canvas.
pub fn paint_render(genome: &[f32], width: usize, height: usize) -> Vec<f32> {
    let mut canvas = vec![1.0f32; width * height * 3];
    for tri in genome.chunks_exact(VALUES_PER_TRIANGLE) {
        let g: [f32; VALUES_PER_TRIANGLE] = std::array::from_fn(|i| tri[i].clamp(0.0, 1.0));
        let alpha = g[9];
        if alpha == 0.0 {
            continue;
        }
        let v = [
            (g[0] * width as f32, g[1] * height as f32),
            (g[2] * width as f32, g[3] * height as f32),
            (g[4] * width as f32, g[5] * height as f32),
        ];
        if edge(v[0], v[1], v[2]) == 0.0 {
            continue;
        }
        let rgb = [g[6], g[7], g[8]];
        let min_x = v[0].0.min(v[1].0).min(v[2].0);
        let max_x = v[0].0.max(v[1].0).max(v[2].0);
        let min_y = v[0].1.min(v[1].1).min(v[2].1);
        let max_y = v[0].1.max(v[1].1).max(v[2].1);
        let x0 = (min_x - 0.5).floor().max(0.0) as usize;
        let x1 = ((max_x - 0.5).ceil().max(0.0) as usize).min(width - 1);
        let y0 = (min_y - 0.5).floor().max(0.0) as usize;
        let y1 = ((max_y - 0.5).ceil().max(0.0) as usize).min(height - 1);
        for y in y0..=y1 {
            for x in x0..=x1 {
                let p = (x as f32 + 0.5, y as f32 + 0.5);
                let e0 = edge(v[0], v[1], p);
                let e1 = edge(v[1], v[2], p);
                let e2 = edge(v[2], v[0], p);
                let inside = (e0 >= 0.0 && e1 >= 0.0 && e2 >= 0.0) || (e0 <= 0.0 && e1 <= 0.0 && e2 <= 0.0);
                if inside {
                    let px = &mut canvas[(y * width + x) * 3..][..3];
                    for (c, &col) in px.iter_mut().zip(&rgb) {
                        *c = (1.0 - alpha) * *c + alpha * col;
                    }
                }
            }
        }
    }
    canvas
}

pub fn mse(a: &[f32], b: &[f32]) -> f32 {
    let sum: f64 = a.iter().zip(b).map(|(&x, &y)| ((x - y) as f64).powi(2)).sum();
    (sum / a.len() as f64) as f32
}

/// A 64×64-style landscape: sky gradient, sun, hills and a house.
pub fn procedural_target(width: usize, height: usize) -> Vec<f32> {
    let mut img = vec![0.0f32; width * height * 3];
    for y in 0..height {
        for x in 0..width {
            let u = (x as f32 + 0.5) / width as f32;
            let v = (y as f32 + 0.5) / height as f32;
            let hill = 0.62 + 0.08 * (u * 6.0).sin();
            let mut c = [0.25 + 0.35 * v, 0.45 + 0.3 * v, 0.85];
            if (u - 0.75).powi(2) + (v - 0.22).powi(2) < 0.012 {
                c = [0.98, 0.85, 0.2];
            }
            if v > hill {
                c = [0.15, 0.5 - 0.2 * (v - hill), 0.15];
            }
            if (0.2..0.45).contains(&u) && (0.55..0.8).contains(&v) {
                c = [0.6, 0.25, 0.15];
            }
            if (0.28..0.36).contains(&u) && (0.68..0.8).contains(&v) {
                c = [0.1, 0.08, 0.05];
            }
            img[(y * width + x) * 3..][..3].copy_from_slice(&c);
        }
    }
    img
}

#[derive(Clone, Debug)]
pub struct PaintTask {
    pub width: usize,
    pub height: usize,
    target: Arc<Vec<f32>>,
}

impl PaintTask {
    pub fn new(width: usize, height: usize, target: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 || target.len() != width * height * 3 {
            return Err(Error::Shape(format!(
                "target of {} values does not match a {width}×{height} RGB canvas",
                target.len()
            )));
        }
        Ok(PaintTask { width, height, target: Arc::new(target) })
    }

    pub fn from_image(img: &RgbImage) -> Result<Self> {
        Self::new(img.width, img.height, img.data.iter().map(|&b| b as f32 / 255.0).collect())
    }

    pub fn target(&self) -> &[f32] {
        &self.target
    }

    /// MSE of the blank white canvas.
    pub fn blank_mse(&self) -> f32 {
        mse(&vec![1.0; self.target.len()], &self.target)
    }

    pub fn genome_mse(&self, genome: &[f32]) -> f32 {
        mse(&paint_render(genome, self.width, self.height), &self.target)
    }
}

impl VectorizedTask for PaintTask {
    /// Canvases rendered by the last step, P×B of them (empty after reset).
    type Extra = Arc<Vec<Vec<f32>>>;

    fn name(&self) -> &'static str {
        "paint"
    }

    fn obs_dim(&self) -> usize {
        0
    }

    fn act_dim(&self) -> usize {
        GENOME_LEN
    }

    fn max_steps(&self) -> usize {
        1
    }

    fn reset(&self, keys: &[Key], pop: usize) -> Result<TaskState<Self::Extra>> {
        check_keys(keys)?;
        Ok(TaskState {
            obs: Observation::shared(pop, keys.len(), 0, Arc::new(Vec::new()))?,
            extra: Arc::new(Vec::new()),
        })
    }

    fn step(&self, state: &TaskState<Self::Extra>, actions: &Tensor) -> Result<StepResult<Self::Extra>> {
        let (p, b) = (state.pop_size(), state.lanes());
        check_actions(actions, p, b, GENOME_LEN)?;
        let canvases: Vec<Vec<f32>> =
            actions.data().chunks_exact(GENOME_LEN).map(|g| paint_render(g, self.width, self.height)).collect();
        let reward = canvases.iter().map(|c| -mse(c, &self.target)).collect();
        Ok(StepResult {
            state: TaskState { obs: state.obs.clone(), extra: Arc::new(canvases) },
            reward: Tensor::from_vec(&[p, b], reward)?,
            done: vec![true; p * b],
        })
    }
}

impl Render for PaintTask {
    fn render(&self, state: &TaskState<Self::Extra>, member: usize, lane: usize) -> RgbImage {
        match state.extra.get(member * state.lanes() + lane) {
            Some(canvas) => RgbImage::from_unit_floats(self.width, self.height, canvas),
            None => RgbImage::new(self.width, self.height, [255, 255, 255]),
        }
    }
}
