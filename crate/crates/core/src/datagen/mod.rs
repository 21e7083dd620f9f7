//! Synthetic benchmark data: random fields, PDE/ODE solvers and the dataset
//! file format.

pub mod burgers;
pub mod darcy;
pub mod dataset;
pub mod generate;
pub mod grf;
pub mod lorenz;

pub use burgers::{burgers_min_steps, burgers_snapshots, burgers_solve};
pub use darcy::{darcy_residual, darcy_solve, threshold_coefficient};
pub use dataset::{decode_dataset, encode_dataset, read_dataset, write_dataset, DatasetPair};
pub use generate::{
    generate_burgers, generate_darcy, generate_lorenz, BurgersGen, DarcyGen, LorenzGen, Problem,
};
pub use grf::{grf_sample, GrfSpec};
pub use lorenz::{lorenz63_solve, lorenz63_trajectory, LorenzParams};
