use crate::algo::Algorithm;
use crate::error::{Error, Result};
use crate::splitrng::{fold_in, Key};
use crate::tensor::{FitnessVector, PopulationParams, Tensor};

/// Isotropic Gaussian search around the best member found so far.
/// Useful as a sanity baseline against PGPE.
#[derive(Clone, Debug)]
pub struct RandomSearch {
    pop_size: usize,
    sigma: f32,
    best: Vec<f32>,
    best_score: f32,
    pending: Option<PopulationParams>,
    key: Key,
    iteration: u64,
}

impl RandomSearch {
    pub fn new(pop_size: usize, sigma: f32, center: Vec<f32>, key: Key) -> Result<Self> {
        if pop_size == 0 {
            return Err(Error::InvalidArgument("pop_size must be >= 1".into()));
        }
        if !(sigma > 0.0) {
            return Err(Error::InvalidArgument(format!("sigma must be > 0, got {sigma}")));
        }
        if center.is_empty() {
            return Err(Error::InvalidArgument("random search needs dim >= 1".into()));
        }
        Ok(RandomSearch {
            pop_size,
            sigma,
            best: center,
            best_score: f32::NEG_INFINITY,
            pending: None,
            key,
            iteration: 0,
        })
    }

    pub fn best_score(&self) -> f32 {
        self.best_score
    }
}

impl Algorithm for RandomSearch {
    fn name(&self) -> &'static str {
        "random_search"
    }

    fn pop_size(&self) -> usize {
        self.pop_size
    }

    fn dim(&self) -> usize {
        self.best.len()
    }

    fn ask(&mut self) -> Result<PopulationParams> {
        if self.pending.is_some() {
            return Err(Error::Protocol("ask called twice without tell".into()));
        }
        let d = self.best.len();
        let mut stream = fold_in(self.key, self.iteration).stream();
        let mut data = Vec::with_capacity(self.pop_size * d);
        for _ in 0..self.pop_size {
            data.extend(self.best.iter().map(|&b| b + self.sigma * stream.normal()));
        }
        let pop = PopulationParams::new(Tensor::from_vec(&[self.pop_size, d], data)?)?;
        self.pending = Some(pop.clone());
        Ok(pop)
    }

    fn tell(&mut self, fitness: &FitnessVector) -> Result<()> {
        let Some(pop) = self.pending.as_ref() else {
            return Err(Error::Protocol("tell without a pending ask".into()));
        };
        if fitness.len() != self.pop_size {
            return Err(Error::Protocol(format!(
                "tell got {} fitness values for population {}",
                fitness.len(),
                self.pop_size
            )));
        }
        fitness.ensure_finite()?;
        let i = fitness.argmax();
        if fitness.scores()[i] > self.best_score {
            self.best_score = fitness.scores()[i];
            self.best = pop.row(i).to_vec();
        }
        self.pending = None;
        self.iteration += 1;
        Ok(())
    }

    fn best_params(&self) -> Vec<f32> {
        self.best.clone()
    }

    fn sigma_mean(&self) -> f32 {
        self.sigma
    }

    fn iteration(&self) -> u64 {
        self.iteration
    }
}
