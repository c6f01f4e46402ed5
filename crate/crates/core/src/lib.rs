pub mod chem;
pub mod descriptors;
pub mod featurize;
pub mod nn;
pub mod model;
pub mod train;
pub mod report;
pub mod cli;
