pub mod cli;
pub mod closedform;
pub mod dual;
pub mod error;
pub mod fcs;
pub mod finite;
pub mod flow;
pub mod linalg;
pub mod meanfield;
pub mod params;
pub mod superop;
