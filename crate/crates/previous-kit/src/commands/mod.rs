pub mod fit;
pub mod generate;
pub mod inspect;
pub mod metrics;
pub mod predict;
pub mod report;
pub mod simulate;
