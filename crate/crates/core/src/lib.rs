//! Context-sensitive knowledge probing of masked language models over
//! SOAP-format clinical notes.

pub mod decode;
pub mod experiment;
pub mod kb;
pub mod metrics;
pub mod prompt;
pub mod retrieval;
pub mod scorer;
pub mod soap;
pub mod synth;
pub mod windowing;
