//! Benchmark tasks. All implement [`VectorizedTask`](crate::VectorizedTask);
//! the ones with a visual form also implement [`Render`](crate::task::Render).

pub mod cartpole;
pub mod mnist;
pub mod paint;
pub mod seq2seq;
pub mod sphere;
pub mod waterworld;

pub use cartpole::{CartPole, CartPoleLane, CartPoleMode};
pub use mnist::{MnistData, MnistMode, MnistTask};
pub use paint::{paint_render, procedural_target, PaintTask};
pub use seq2seq::{make_batch, AdditionMetric, AdditionTask};
pub use sphere::SphereTask;
pub use waterworld::{Arena, WaterWorld};
