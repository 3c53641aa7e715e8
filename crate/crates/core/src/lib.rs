pub mod artifacts;
pub mod bundled;
pub mod cli;
pub mod formulation;
pub mod linalg;
pub mod network;
pub mod nlp;
pub mod ipm;
pub mod conditions;
pub mod mip;
pub mod experiment;
