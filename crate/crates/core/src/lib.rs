pub mod bench;
pub mod config;
pub mod error;
pub mod fe;
pub mod hbm;
pub mod hotr;
pub mod identify;
pub mod io;
pub mod linalg;
pub mod model;
pub mod rom;
pub mod sdof;
pub mod timedomain;
