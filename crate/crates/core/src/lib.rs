//! Engine for a grounded educational chatbot over emotion-tagged tales.

pub mod classify;
pub mod clock;
pub mod config;
pub mod corpus;
pub mod dialogue;
pub mod monitor;
pub mod retrieval;
pub mod taxonomy;
pub mod textproc;
pub mod xml;
