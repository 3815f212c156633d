//! Mixed graph contrastive network for semi-supervised node classification.

pub mod cli;
pub mod corered;
pub mod encoder;
pub mod graphdata;
pub mod mixview;
pub mod ndiff;
pub mod trainer;
