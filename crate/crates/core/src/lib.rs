pub mod corpus;
pub mod decoder;
pub mod experiments;
pub mod formatting;
pub mod humaneval;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod synthetic;
pub mod text;
pub mod tokenizer;
pub mod trainer;
