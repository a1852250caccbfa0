pub mod anonymizer;
pub mod digest;
pub mod gateway;
pub mod governance;
pub mod metrics;
pub mod profile;
pub mod review;
pub mod survey;

pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");
