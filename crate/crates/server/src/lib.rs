//! Session server for the lab experiments.
//!
//! Clients connect over TCP, create sessions, stream frames and patch hot
//! parameters while a session runs. See [`protocol`] for the wire format.

pub mod config;
pub mod protocol;
pub mod server;
pub mod session;
pub mod sim;

pub use config::ServerConfig;
pub use server::Server;
pub use session::SessionManager;
