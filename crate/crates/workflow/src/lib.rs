//! Prompt-driven workflow around the emsim core: the LLM gateway
//! ([`genai`]), configuration ([`config`]) and the staged pipeline with its
//! verdict ladder and on-disk sessions ([`pipeline`]).

pub mod config;
pub mod genai;
pub mod pipeline;

pub use config::{RunMode, WorkflowConfig};
pub use pipeline::{run_workflow, Workflow, WorkflowReport};
