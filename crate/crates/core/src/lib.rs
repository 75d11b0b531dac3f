pub mod container;
pub mod datagen;
pub mod experiments;
pub mod grid;
pub mod nn;
pub mod powerflow;
pub mod surrogates;
pub mod training;
