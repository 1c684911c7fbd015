pub mod autodiff;
pub mod cohort;
pub mod config;
pub mod evolution;
pub mod graph;
pub mod heads;
pub mod init;
pub mod metrics;
pub mod model;
pub mod objective;
pub mod pipeline;
pub mod report;
pub mod train;
pub mod trajectory;
