pub mod evaluator;
pub mod formats;
pub mod geometry;
pub mod indices;
pub mod matcher;
pub mod merger;
pub mod pipeline;
pub mod stats;
pub mod synth;
pub mod tiler;
