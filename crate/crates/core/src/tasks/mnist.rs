//! MNIST digit classification as a single-step task. Each lane holds a batch
//! of images (shared by all members); the member's logits for the batch are
//! its action and the batch accuracy its reward.

use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::policies::{CLASSES, IMAGE_PIXELS, IMAGE_SIDE};
use crate::splitrng::Key;
use crate::task::{check_actions, check_keys, StepResult, TaskState, VectorizedTask};
use crate::tensor::{Observation, Tensor};

pub const IMAGES_MAGIC: u32 = 2051;
pub const LABELS_MAGIC: u32 = 2049;

/// Images in [0, 1] (n×28×28, row-major) with class ids.
#[derive(Clone, Debug, PartialEq)]
pub struct MnistData {
    pub images: Vec<f32>,
    pub labels: Vec<u8>,
}

fn format_err(file: &str, field: &'static str, detail: String) -> Error {
    Error::Format { file: file.to_string(), field, detail }
}

fn be_u32(bytes: &[u8], offset: usize, file: &str, field: &'static str) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| format_err(file, field, format!("file ends at byte {} inside the header", bytes.len())))
}

fn check_magic(bytes: &[u8], expected: u32, file: &str) -> Result<()> {
    let magic = be_u32(bytes, 0, file, "magic")?;
    if magic != expected {
        return Err(format_err(file, "magic", format!("expected {expected}, found {magic}")));
    }
    Ok(())
}

/// Parses an IDX3 image file into n×784 floats scaled by 1/255.
pub fn parse_idx_images(bytes: &[u8], file: &str) -> Result<Vec<f32>> {
    check_magic(bytes, IMAGES_MAGIC, file)?;
    let n = be_u32(bytes, 4, file, "count")? as usize;
    let rows = be_u32(bytes, 8, file, "rows")? as usize;
    let cols = be_u32(bytes, 12, file, "cols")? as usize;
    if rows != IMAGE_SIDE || cols != IMAGE_SIDE {
        return Err(format_err(file, "dims", format!("expected 28×28 images, header says {rows}×{cols}")));
    }
    let body = &bytes[16..];
    if body.len() != n * IMAGE_PIXELS {
        return Err(format_err(
            file,
            "count",
            format!("header declares {n} images ({} bytes) but body has {} bytes", n * IMAGE_PIXELS, body.len()),
        ));
    }
    Ok(body.iter().map(|&b| b as f32 / 255.0).collect())
}

/// Parses an IDX1 label file.
pub fn parse_idx_labels(bytes: &[u8], file: &str) -> Result<Vec<u8>> {
    check_magic(bytes, LABELS_MAGIC, file)?;
    let n = be_u32(bytes, 4, file, "count")? as usize;
    let body = &bytes[8..];
    if body.len() != n {
        return Err(format_err(file, "count", format!("header declares {n} labels but body has {} bytes", body.len())));
    }
    if let Some(pos) = body.iter().position(|&l| l as usize >= CLASSES) {
        return Err(format_err(file, "label", format!("label {} at record {pos} is not a digit", body[pos])));
    }
    Ok(body.to_vec())
}

impl MnistData {
    pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<MnistData> {
        let read = |p: &Path| std::fs::read(p).map_err(|e| Error::io(p, e));
        let images = parse_idx_images(&read(images_path)?, &images_path.display().to_string())?;
        let labels = parse_idx_labels(&read(labels_path)?, &labels_path.display().to_string())?;
        if images.len() != labels.len() * IMAGE_PIXELS {
            return Err(format_err(
                &labels_path.display().to_string(),
                "count",
                format!("{} labels for {} images", labels.len(), images.len() / IMAGE_PIXELS),
            ));
        }
        Ok(MnistData { images, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// The first `n` records.
    pub fn truncated(mut self, n: usize) -> MnistData {
        let n = n.min(self.len());
        self.images.truncate(n * IMAGE_PIXELS);
        self.labels.truncate(n);
        self
    }

    pub fn image(&self, i: usize) -> &[f32] {
        &self.images[i * IMAGE_PIXELS..(i + 1) * IMAGE_PIXELS]
    }
}

/// Fraction of rows whose first maximal logit is the label.
pub fn accuracy(logits: &[f32], labels: &[u8]) -> f32 {
    let correct = logits
        .chunks_exact(CLASSES)
        .zip(labels)
        .filter(|(row, &label)| {
            let mut best = 0;
            for (c, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = c;
                }
            }
            best == label as usize
        })
        .count();
    correct as f32 / labels.len() as f32
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MnistMode {
    /// Each lane draws `batch` distinct training images from its key.
    Train { batch: usize },
    /// Each lane holds the whole dataset in order.
    FullSet,
}

#[derive(Clone, Debug)]
pub struct MnistTask {
    data: Arc<MnistData>,
    mode: MnistMode,
}

impl MnistTask {
    pub fn new(data: Arc<MnistData>, mode: MnistMode) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::InvalidArgument("MNIST dataset is empty".into()));
        }
        if let MnistMode::Train { batch } = mode {
            if batch == 0 || batch > data.len() {
                return Err(Error::InvalidArgument(format!(
                    "batch size {batch} must be in 1..={}",
                    data.len()
                )));
            }
        }
        Ok(MnistTask { data, mode })
    }

    pub fn images_per_lane(&self) -> usize {
        match self.mode {
            MnistMode::Train { batch } => batch,
            MnistMode::FullSet => self.data.len(),
        }
    }

    /// Indices of the lane's images: a uniform sample without replacement.
    pub fn batch_indices(&self, key: Key) -> Vec<usize> {
        let n = self.data.len();
        match self.mode {
            MnistMode::FullSet => (0..n).collect(),
            MnistMode::Train { batch } => {
                let mut idx: Vec<usize> = (0..n).collect();
                let mut s = key.stream();
                for i in 0..batch {
                    let j = i + s.below((n - i) as u64) as usize;
                    idx.swap(i, j);
                }
                idx.truncate(batch);
                idx
            }
        }
    }
}

impl VectorizedTask for MnistTask {
    /// B×n labels of the lane batches.
    type Extra = Arc<Vec<u8>>;

    fn name(&self) -> &'static str {
        "mnist"
    }

    fn obs_dim(&self) -> usize {
        self.images_per_lane() * IMAGE_PIXELS
    }

    fn act_dim(&self) -> usize {
        self.images_per_lane() * CLASSES
    }

    fn max_steps(&self) -> usize {
        1
    }

    fn reset(&self, keys: &[Key], pop: usize) -> Result<TaskState<Self::Extra>> {
        check_keys(keys)?;
        let n = self.images_per_lane();
        let mut images = Vec::with_capacity(keys.len() * n * IMAGE_PIXELS);
        let mut labels = Vec::with_capacity(keys.len() * n);
        for &k in keys {
            for i in self.batch_indices(k) {
                images.extend_from_slice(self.data.image(i));
                labels.push(self.data.labels[i]);
            }
        }
        Ok(TaskState {
            obs: Observation::shared(pop, keys.len(), n * IMAGE_PIXELS, Arc::new(images))?,
            extra: Arc::new(labels),
        })
    }

    fn step(&self, state: &TaskState<Self::Extra>, actions: &Tensor) -> Result<StepResult<Self::Extra>> {
        let (p, b) = (state.pop_size(), state.lanes());
        let n = self.images_per_lane();
        check_actions(actions, p, b, n * CLASSES)?;
        let reward: Vec<f32> = actions
            .data()
            .chunks_exact(n * CLASSES)
            .enumerate()
            .map(|(idx, logits)| accuracy(logits, &state.extra[(idx % b) * n..][..n]))
            .collect();
        Ok(StepResult {
            state: state.clone(),
            reward: Tensor::from_vec(&[p, b], reward)?,
            done: vec![true; p * b],
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::splitrng::{new_key, split};

    fn idx_images(n: u32, rows: u32, pixels: &[u8]) -> Vec<u8> {
        let mut v = vec![0x00, 0x00, 0x08, 0x03];
        for x in [n, rows, 28] {
            v.extend_from_slice(&x.to_be_bytes());
        }
        v.extend_from_slice(pixels);
        v
    }

    fn idx_labels(labels: &[u8]) -> Vec<u8> {
        let mut v = LABELS_MAGIC.to_be_bytes().to_vec();
        v.extend_from_slice(&(labels.len() as u32).to_be_bytes());
        v.extend_from_slice(labels);
        v
    }

    fn field_of(e: Error) -> &'static str {
        match e {
            Error::Format { field, .. } => field,
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn parses_images_and_scales() {
        let mut pixels = vec![0u8; 2 * 784];
        pixels[0] = 255;
        pixels[784 + 1] = 51;
        let img = parse_idx_images(&idx_images(2, 28, &pixels), "img").unwrap();
        assert_eq!(img.len(), 2 * 784);
        assert_eq!(img[0], 1.0);
        assert_eq!(img[785], 0.2);
    }

    #[test]
    fn rejects_malformed_files() {
        assert_eq!(field_of(parse_idx_labels(&idx_images(1, 28, &[0; 784]), "l").unwrap_err()), "magic");
        assert_eq!(field_of(parse_idx_images(&idx_labels(&[1]), "i").unwrap_err()), "magic");
        assert_eq!(field_of(parse_idx_images(&idx_images(2, 28, &[0; 784]), "i").unwrap_err()), "count");
        assert_eq!(field_of(parse_idx_images(&idx_images(1, 27, &[0; 784]), "i").unwrap_err()), "dims");
        assert_eq!(field_of(parse_idx_images(&[0, 0, 8], "i").unwrap_err()), "magic");
        assert_eq!(field_of(parse_idx_labels(&idx_labels(&[3, 12]), "l").unwrap_err()), "label");
        let mut short = idx_labels(&[1, 2, 3]);
        short.pop();
        assert_eq!(field_of(parse_idx_labels(&short, "l").unwrap_err()), "count");
    }

    fn toy_task(n: usize, batch: usize) -> MnistTask {
        let images = (0..n * 784).map(|i| (i % 7) as f32 / 7.0).collect();
        let labels = (0..n).map(|i| (i * 3 % 10) as u8).collect();
        MnistTask::new(Arc::new(MnistData { images, labels }), MnistMode::Train { batch }).unwrap()
    }

    #[test]
    fn batch_sampling_is_distinct_and_deterministic() {
        let task = toy_task(50, 20);
        let k = new_key(9);
        let idx = task.batch_indices(k);
        assert_eq!(idx, task.batch_indices(k));
        let mut sorted = idx.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), 20);
        assert_ne!(idx, task.batch_indices(new_key(10)));
    }

    #[test]
    fn one_hot_logits_score_one_and_zero_logits_pick_class_zero() {
        let task = toy_task(40, 30);
        let st = task.reset(&split(new_key(1), 2).unwrap(), 2).unwrap();
        let labels = st.extra.clone();
        let mut onehot = vec![0.0f32; 2 * 2 * 30 * 10];
        for i in 0..2 {
            for j in 0..2 {
                for r in 0..30 {
                    onehot[((i * 2 + j) * 30 + r) * 10 + labels[j * 30 + r] as usize] = 1.0;
                }
            }
        }
        let res = task.step(&st, &Tensor::from_vec(&[2, 2, 300], onehot).unwrap()).unwrap();
        assert_eq!(res.reward.data(), &[1.0; 4]);
        assert_eq!(res.done, vec![true; 4]);
        let zeros = task.step(&st, &Tensor::zeros(&[2, 2, 300])).unwrap();
        for j in 0..2 {
            let freq = labels[j * 30..(j + 1) * 30].iter().filter(|&&l| l == 0).count() as f32 / 30.0;
            assert_eq!(zeros.reward.data()[j], freq);
            assert_eq!(zeros.reward.data()[2 + j], freq);
        }
    }

    #[test]
    fn full_set_mode_covers_everything_in_order() {
        let base = toy_task(12, 4);
        let task = MnistTask::new(base.data.clone(), MnistMode::FullSet).unwrap();
        assert_eq!(task.batch_indices(new_key(1)), (0..12).collect::<Vec<_>>());
        assert_eq!(task.act_dim(), 120);
        assert!(MnistTask::new(base.data.clone(), MnistMode::Train { batch: 13 }).is_err());
    }
}
