//! Grounded physiotherapy advisor.
//!
//! A query is validated and mapped to a condition by a language model,
//! linked to a curated knowledge base, answered from BM25-retrieved pages,
//! and returned with sentence-level references, sampled rehabilitation
//! exercises and over-the-counter medication suggestions.

pub mod api;
pub mod grounding;
pub mod kb_store;
pub mod linker;
pub mod llm_gateway;
pub mod pipeline;
pub mod text_index;

pub use grounding::{AnswerSentence, GroundedAnswer, Reference, DISCLAIMER};
pub use kb_store::KnowledgeBase;
pub use linker::{LinkMethod, LinkResult};
pub use llm_gateway::LlmGateway;
pub use pipeline::{handle_query, Advisor, PipelineConfig, PipelineTrace};
