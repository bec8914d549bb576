//! Building instruction datasets for conditional table generation, driving
//! chat-completion endpoints, parsing generated tables, and scoring them.

pub mod config;
pub mod fidelity;
pub mod instruct;
pub mod llm;
pub mod manifest;
pub mod metadata;
pub mod parse;
pub mod pipeline;
pub mod registry;
pub mod report;
pub mod seed;
pub mod table;
pub mod utility;
