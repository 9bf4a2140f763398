pub mod analytics;
pub mod clock;
pub mod empathy;
pub mod platform;
pub mod rewriter;
pub mod safety;
pub mod study;
pub mod textcore;
