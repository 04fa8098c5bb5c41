//! Secure-coding-practice assessment of source functions with LLM verdicts,
//! LSP trustworthiness scoring and evaluation against ground truth.

pub mod analytics;
pub mod corpus;
pub mod gateway;
pub mod practices;
pub mod prompting;
pub mod quality_model;
