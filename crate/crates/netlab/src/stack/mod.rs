//! Miniature TCP/IP stack: addressing and forwarding, ICMP echo, the UDP
//! echo/chargen/DNS services, TCP with a three-way handshake and a
//! SYN_RECV queue, and distance-vector routing.

pub mod dns;
pub mod icmp;
pub mod ip;
pub mod route;
pub mod tcp;
pub mod udp;
