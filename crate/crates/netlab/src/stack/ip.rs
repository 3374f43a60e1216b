//! IP addressing and the datagram that every simulated transmission nests
//! inside a frame.

use std::fmt;
use std::net::Ipv4Addr;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ipsec::ah::AhPacket;
use crate::ipsec::esp::EspPacket;
use crate::stack::icmp::IcmpMessage;
use crate::stack::tcp::TcpSegment;
use crate::stack::udp::UdpMessage;
use crate::symcrypto::Term;

/// Protocol numbers, rendered exactly like this in traces.
pub mod proto {
    pub const ICMP: u8 = 1;
    pub const IPIP: u8 = 4;
    pub const TCP: u8 = 6;
    pub const UDP: u8 = 17;
    pub const ESP: u8 = 50;
    pub const AH: u8 = 51;
}

pub const DEFAULT_TTL: u8 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Scope {
    Public,
    Private,
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct IpAddr(pub Ipv4Addr);

impl IpAddr {
    pub fn new(a: u8, b: u8, c: u8, d: u8) -> Self {
        IpAddr(Ipv4Addr::new(a, b, c, d))
    }

    /// RFC 1918 ranges are private; everything else is public. Private
    /// addresses are never routable across the public region of a
    /// topology because routers do not advertise private prefixes onto
    /// public networks.
    pub fn scope(&self) -> Scope {
        let o = self.0.octets();
        let private = o[0] == 10
            || (o[0] == 172 && (16..=31).contains(&o[1]))
            || (o[0] == 192 && o[1] == 168);
        if private {
            Scope::Private
        } else {
            Scope::Public
        }
    }

    fn to_u32(self) -> u32 {
        u32::from(self.0)
    }
}

impl fmt::Display for IpAddr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AddrError {
    #[error("invalid IP address: {0}")]
    BadAddress(String),
    #[error("invalid prefix: {0}")]
    BadPrefix(String),
}

impl FromStr for IpAddr {
    type Err = AddrError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ipv4Addr::from_str(s)
            .map(IpAddr)
            .map_err(|_| AddrError::BadAddress(s.to_string()))
    }
}

/// A network prefix such as `10.0.1.0/24`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Prefix {
    base: u32,
    pub len: u8,
}

impl Prefix {
    pub fn new(base: IpAddr, len: u8) -> Self {
        let mask = Self::mask_of(len);
        Prefix { base: base.to_u32() & mask, len }
    }

    fn mask_of(len: u8) -> u32 {
        if len == 0 {
            0
        } else {
            u32::MAX << (32 - len as u32)
        }
    }

    pub fn contains(&self, ip: IpAddr) -> bool {
        ip.to_u32() & Self::mask_of(self.len) == self.base
    }

    /// Host-part-all-ones directed broadcast address.
    pub fn broadcast(&self) -> IpAddr {
        IpAddr(Ipv4Addr::from(self.base | !Self::mask_of(self.len)))
    }

    pub fn base_addr(&self) -> IpAddr {
        IpAddr(Ipv4Addr::from(self.base))
    }

    pub fn is_private(&self) -> bool {
        self.base_addr().scope() == Scope::Private
    }
}

impl FromStr for Prefix {
    type Err = AddrError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (addr, len) = s.split_once('/').ok_or_else(|| AddrError::BadPrefix(s.into()))?;
        let base: IpAddr = addr.parse()?;
        let len: u8 = len.parse().map_err(|_| AddrError::BadPrefix(s.into()))?;
        if len > 32 {
            return Err(AddrError::BadPrefix(s.into()));
        }
        Ok(Prefix::new(base, len))
    }
}

impl fmt::Display for Prefix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", Ipv4Addr::from(self.base), self.len)
    }
}

/// The transport (or tunnel) unit a datagram carries.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Payload {
    Icmp(IcmpMessage),
    Tcp(TcpSegment),
    Udp(UdpMessage),
    /// Raw term payload; protocol 4 tunnel bodies travel this way.
    Term(Term),
    Ah(AhPacket),
    Esp(EspPacket),
}

impl Payload {
    /// Byte length of the carried data, the measure block-cipher padding
    /// is computed over.
    pub fn byte_len(&self) -> usize {
        match self {
            Payload::Icmp(_) => 8,
            Payload::Tcp(seg) => seg.data.len(),
            Payload::Udp(msg) => term_len(&msg.data),
            Payload::Term(t) => term_len(t),
            Payload::Ah(ah) => ah.inner.byte_len(),
            Payload::Esp(_) => 0,
        }
    }

    pub fn render(&self) -> String {
        match self {
            Payload::Icmp(m) => m.render(),
            Payload::Tcp(seg) => seg.render(),
            Payload::Udp(m) => m.render(),
            Payload::Term(t) => t.render(),
            Payload::Ah(ah) => ah.render(),
            Payload::Esp(esp) => esp.render(),
        }
    }
}

fn term_len(t: &Term) -> usize {
    match t.as_plain() {
        Some(b) => b.len(),
        None => t.render().len(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IpDatagram {
    pub src: IpAddr,
    pub dst: IpAddr,
    pub protocol: u8,
    pub ttl: u8,
    pub payload: Payload,
}

impl IpDatagram {
    pub fn new(src: IpAddr, dst: IpAddr, protocol: u8, payload: Payload) -> Self {
        IpDatagram { src, dst, protocol, ttl: DEFAULT_TTL, payload }
    }

    pub fn render(&self) -> String {
        format!(
            "ip {}->{} p={} ttl={} {}",
            self.src,
            self.dst,
            self.protocol,
            self.ttl,
            self.payload.render()
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scope_follows_private_ranges() {
        assert_eq!(IpAddr::new(10, 0, 1, 5).scope(), Scope::Private);
        assert_eq!(IpAddr::new(172, 16, 0, 1).scope(), Scope::Private);
        assert_eq!(IpAddr::new(172, 32, 0, 1).scope(), Scope::Public);
        assert_eq!(IpAddr::new(192, 168, 9, 9).scope(), Scope::Private);
        assert_eq!(IpAddr::new(203, 0, 113, 7).scope(), Scope::Public);
    }

    #[test]
    fn prefix_contains_and_broadcast() {
        let p: Prefix = "10.0.1.0/24".parse().unwrap();
        assert!(p.contains(IpAddr::new(10, 0, 1, 200)));
        assert!(!p.contains(IpAddr::new(10, 0, 2, 1)));
        assert_eq!(p.broadcast(), IpAddr::new(10, 0, 1, 255));
        let q: Prefix = "0.0.0.0/0".parse().unwrap();
        assert!(q.contains(IpAddr::new(8, 8, 8, 8)));
    }

    #[test]
    fn prefix_parsing_rejects_garbage() {
        assert!("10.0.0.0".parse::<Prefix>().is_err());
        assert!("10.0.0.0/33".parse::<Prefix>().is_err());
        assert!("10.0.0.x/8".parse::<Prefix>().is_err());
    }
}
