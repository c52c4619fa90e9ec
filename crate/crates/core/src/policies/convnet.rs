//! Small ConvNet for 28×28 grayscale digits:
//! conv3×3×8 (same) → ReLU → maxpool2 → conv3×3×16 (same) → ReLU → maxpool2 →
//! dense 784→10. Feature maps are HWC, kernels HWIO.

use crate::error::{Error, Result};
use crate::policies::ParamLayout;
use crate::policy::{check_params, Policy, PolicyState};
use crate::tensor::{affine_into, Observation, PopulationParams, Tensor};

pub const IMAGE_SIDE: usize = 28;
pub const IMAGE_PIXELS: usize = IMAGE_SIDE * IMAGE_SIDE;
pub const CLASSES: usize = 10;
const C1: usize = 8;
const C2: usize = 16;
const POOLED: usize = 7 * 7 * C2;

/// 80 + 1168 + 7850.
pub const CONVNET_PARAMS: usize = 9 * C1 + C1 + 9 * C1 * C2 + C2 + POOLED * CLASSES + CLASSES;

/// 3×3 convolution with zero "same" padding on an h×w×ci map.
///
/// Each output is `bias + Σ in·k` accumulated over (ky, kx, ci) in increasing
/// order, skipping taps that fall outside the image.
pub fn conv3x3_same(input: &[f32], h: usize, w: usize, ci: usize, kernel: &[f32], bias: &[f32], co: usize) -> Vec<f32> {
    assert_eq!(input.len(), h * w * ci);
    assert_eq!(kernel.len(), 9 * ci * co);
    assert_eq!(bias.len(), co);
    let mut out = vec![0.0; h * w * co];
    for y in 0..h {
        for x in 0..w {
            let acc = &mut out[(y * w + x) * co..(y * w + x + 1) * co];
            acc.copy_from_slice(bias);
            for ky in 0..3 {
                let yy = y as isize + ky as isize - 1;
                if yy < 0 || yy >= h as isize {
                    continue;
                }
                for kx in 0..3 {
                    let xx = x as isize + kx as isize - 1;
                    if xx < 0 || xx >= w as isize {
                        continue;
                    }
                    let px = &input[(yy as usize * w + xx as usize) * ci..][..ci];
                    let kbase = (ky * 3 + kx) * ci * co;
                    for (c, &v) in px.iter().enumerate() {
                        let kr = &kernel[kbase + c * co..kbase + (c + 1) * co];
                        for (a, &k) in acc.iter_mut().zip(kr) {
                            *a += v * k;
                        }
                    }
                }
            }
        }
    }
    out
}

/// Same arithmetic as [`conv3x3_same`] with sizes known at compile time.
fn conv3x3_fixed<const H: usize, const CI: usize, const CO: usize>(
    input: &[f32],
    kernel: &[f32],
    bias: &[f32],
    out: &mut [f32],
) {
    let kernel: &[[f32; CO]] = as_rows(kernel);
    for y in 0..H {
        for x in 0..H {
            let mut acc = [0.0f32; CO];
            acc.copy_from_slice(bias);
            for ky in 0..3 {
                let yy = y as isize + ky as isize - 1;
                if yy < 0 || yy >= H as isize {
                    continue;
                }
                for kx in 0..3 {
                    let xx = x as isize + kx as isize - 1;
                    if xx < 0 || xx >= H as isize {
                        continue;
                    }
                    let base = (yy as usize * H + xx as usize) * CI;
                    let kb = (ky * 3 + kx) * CI;
                    for c in 0..CI {
                        let v = input[base + c];
                        let kr = &kernel[kb + c];
                        for o in 0..CO {
                            acc[o] += v * kr[o];
                        }
                    }
                }
            }
            out[(y * H + x) * CO..(y * H + x + 1) * CO].copy_from_slice(&acc);
        }
    }
}

fn as_rows<const N: usize>(flat: &[f32]) -> &[[f32; N]] {
    let (rows, rest) = flat.as_chunks::<N>();
    debug_assert!(rest.is_empty());
    rows
}

/// ReLU followed by 2×2/2 max pooling on an h×h×c map.
fn relu_maxpool(input: &[f32], h: usize, c: usize, out: &mut [f32]) {
    let ho = h / 2;
    for y in 0..ho {
        for x in 0..ho {
            for ch in 0..c {
                let at = |yy: usize, xx: usize| input[(yy * h + xx) * c + ch];
                let m = at(2 * y, 2 * x).max(at(2 * y, 2 * x + 1)).max(at(2 * y + 1, 2 * x)).max(at(2 * y + 1, 2 * x + 1));
                out[(y * ho + x) * c + ch] = m.max(0.0);
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct ConvNet {
    layout: ParamLayout,
}

impl Default for ConvNet {
    fn default() -> Self {
        Self::new()
    }
}

struct Scratch {
    a1: Vec<f32>,
    p1: Vec<f32>,
    a2: Vec<f32>,
    p2: Vec<f32>,
}

impl ConvNet {
    pub fn new() -> Self {
        let mut layout = ParamLayout::new();
        layout.push("conv1.w", &[3, 3, 1, C1]);
        layout.push("conv1.b", &[C1]);
        layout.push("conv2.w", &[3, 3, C1, C2]);
        layout.push("conv2.b", &[C2]);
        layout.push("dense.w", &[POOLED, CLASSES]);
        layout.push("dense.b", &[CLASSES]);
        ConvNet { layout }
    }

    fn forward_image(&self, image: &[f32], genome: &[f32], s: &mut Scratch, logits: &mut [f32]) {
        let l = &self.layout;
        conv3x3_fixed::<28, 1, C1>(image, l.slice(genome, 0), l.slice(genome, 1), &mut s.a1);
        relu_maxpool(&s.a1, 28, C1, &mut s.p1);
        conv3x3_fixed::<14, C1, C2>(&s.p1, l.slice(genome, 2), l.slice(genome, 3), &mut s.a2);
        relu_maxpool(&s.a2, 14, C2, &mut s.p2);
        affine_into(&s.p2, l.slice(genome, 4), Some(l.slice(genome, 5)), POOLED, CLASSES, logits);
    }

    /// Logits for `images` (n×784) under one genome, n×10.
    pub fn forward_member(&self, images: &[f32], genome: &[f32]) -> Vec<f32> {
        let n = images.len() / IMAGE_PIXELS;
        let mut s = Scratch {
            a1: vec![0.0; 28 * 28 * C1],
            p1: vec![0.0; 14 * 14 * C1],
            a2: vec![0.0; 14 * 14 * C2],
            p2: vec![0.0; POOLED],
        };
        let mut logits = vec![0.0; n * CLASSES];
        for (img, out) in images.chunks_exact(IMAGE_PIXELS).zip(logits.chunks_exact_mut(CLASSES)) {
            self.forward_image(img, genome, &mut s, out);
        }
        logits
    }
}

impl Policy for ConvNet {
    fn num_params(&self) -> usize {
        self.layout.total()
    }

    fn layout(&self) -> ParamLayout {
        self.layout.clone()
    }

    fn describe(&self) -> String {
        "convnet".into()
    }

    fn reset(&self, _obs: &Observation) -> PolicyState {
        PolicyState::empty()
    }

    /// Observation lanes hold n images each (dim = n·784); actions are the
    /// n×10 logits per lane.
    fn get_actions(
        &self,
        obs: &Observation,
        params: &PopulationParams,
        state: &PolicyState,
    ) -> Result<(Tensor, PolicyState)> {
        check_params(self, obs, params)?;
        if obs.dim() == 0 || obs.dim() % IMAGE_PIXELS != 0 {
            return Err(Error::Shape(format!("ConvNet needs lanes of 28×28 images, got dim {}", obs.dim())));
        }
        let (p, b) = (obs.pop_size(), obs.lanes());
        let per_lane = obs.dim() / IMAGE_PIXELS * CLASSES;
        let mut out = Vec::with_capacity(p * b * per_lane);
        for i in 0..p {
            out.extend(self.forward_member(obs.member(i), params.row(i)));
        }
        Ok((Tensor::from_vec(&[p, b, per_lane], out)?, state.clone()))
    }
}
