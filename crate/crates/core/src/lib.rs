pub mod corpus;
pub mod evalkit;
pub mod harness;
pub mod lexer;
pub mod mock_server;
pub mod orchestrator;
pub mod sketch;
pub mod traindata;
