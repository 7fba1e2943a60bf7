//! Conversational slide-deck generation over financial time series.

pub mod deck;
pub mod insights;
pub mod kb;
pub mod mapping;
pub mod parser;
pub mod render;
pub mod sim;
pub mod skills;
pub mod timeseries;
pub mod workspace;
