pub mod annotation;
pub mod checker;
pub mod depparse;
pub mod dsl;
pub mod lexicon;
pub mod logic;
pub mod metrics;
pub mod par;
pub mod pipeline;
pub mod synth;
