//! netlab is a deterministic discrete-event internetwork simulator.
//!
//! It models hosts, routers, links and broadcast domains, runs a miniature
//! TCP/IP stack on top of them, and treats all cryptography symbolically:
//! ciphertexts are opaque terms that can only be opened with the matching
//! key. On that substrate it executes classic network attacks (session
//! hijacking, SYN floods, smurf amplification, DNS cache poisoning, ...)
//! and the controls that counter them (IPsec, VPN tunneling, SSH/TLS/
//! Kerberos handshakes, firewalls, secure e-mail envelopes), producing
//! byte-reproducible event traces that scenarios can assert against.
//!
//! The usual entry points are [`scenario`] (parse and run a scenario file)
//! and [`simnet::Network`] (build a topology programmatically).

pub mod attacks;
pub mod derive;
pub mod firewall;
pub mod handshakes;
pub mod ipsec;
pub mod scenario;
pub mod secmail;
pub mod simnet;
pub mod stack;
pub mod symcrypto;

pub use simnet::{Network, NodeId, Trace, TraceEvent};
