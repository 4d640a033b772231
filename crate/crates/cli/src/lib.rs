//! Command implementations behind the `asv-fallback` binary, and the live
//! session WebSocket server.

pub mod commands;
pub mod embedding;
pub mod server;
