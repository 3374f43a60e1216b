//! A caching resolver collapsed to one server with one authoritative
//! fixture table. What matters for the scenarios is cache semantics:
//! entries expire, expired entries are never returned, and whoever can
//! write to the cache controls every client that queries it in the
//! meantime.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::stack::ip::IpAddr;

pub const DEFAULT_DNS_TTL: u64 = 50;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DnsError {
    #[error("name not found: {0}")]
    NameNotFound(String),
}

#[derive(Debug, Clone, Default)]
pub struct DnsCache {
    entries: BTreeMap<String, (IpAddr, u64)>,
}

impl DnsCache {
    /// Unexpired lookup; an entry whose expiry has passed is treated as
    /// absent.
    pub fn lookup(&self, name: &str, now: u64) -> Option<IpAddr> {
        let (ip, expiry) = self.entries.get(name)?;
        if now < *expiry {
            Some(*ip)
        } else {
            None
        }
    }

    /// At most one entry per name: installing replaces.
    pub fn install(&mut self, name: &str, ip: IpAddr, expiry: u64) {
        self.entries.insert(name.to_string(), (ip, expiry));
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, Default)]
pub struct DnsServer {
    pub cache: DnsCache,
    pub authoritative: BTreeMap<String, IpAddr>,
    pub ttl: u64,
}

impl DnsServer {
    pub fn new() -> Self {
        DnsServer { cache: DnsCache::default(), authoritative: BTreeMap::new(), ttl: DEFAULT_DNS_TTL }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DnsSource {
    Cache,
    Authoritative,
}

/// Cache hit returns the cached address; a miss consults the
/// authoritative table and installs the answer with the configured ttl.
pub fn resolve(server: &mut DnsServer, name: &str, now: u64) -> Result<(IpAddr, DnsSource), DnsError> {
    if let Some(ip) = server.cache.lookup(name, now) {
        return Ok((ip, DnsSource::Cache));
    }
    let ip = *server
        .authoritative
        .get(name)
        .ok_or_else(|| DnsError::NameNotFound(name.to_string()))?;
    server.cache.install(name, ip, now + server.ttl);
    Ok((ip, DnsSource::Authoritative))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn server() -> DnsServer {
        let mut s = DnsServer::new();
        s.authoritative.insert("files.example".into(), IpAddr::new(203, 0, 113, 7));
        s
    }

    #[test]
    fn miss_consults_authority_and_caches() {
        let mut s = server();
        let (ip, src) = resolve(&mut s, "files.example", 0).unwrap();
        assert_eq!(ip, IpAddr::new(203, 0, 113, 7));
        assert_eq!(src, DnsSource::Authoritative);
        let (_, src) = resolve(&mut s, "files.example", 1).unwrap();
        assert_eq!(src, DnsSource::Cache);
    }

    #[test]
    fn expired_entries_are_never_returned() {
        let mut s = server();
        s.cache.install("files.example", IpAddr::new(198, 51, 100, 66), 10);
        assert_eq!(s.cache.lookup("files.example", 9), Some(IpAddr::new(198, 51, 100, 66)));
        assert_eq!(s.cache.lookup("files.example", 10), None);
        // Post-expiry resolution goes back to the authority.
        let (ip, src) = resolve(&mut s, "files.example", 11).unwrap();
        assert_eq!(ip, IpAddr::new(203, 0, 113, 7));
        assert_eq!(src, DnsSource::Authoritative);
    }

    #[test]
    fn unknown_name_is_an_error() {
        let mut s = server();
        assert_eq!(
            resolve(&mut s, "nope.example", 0),
            Err(DnsError::NameNotFound("nope.example".into()))
        );
    }

    #[test]
    fn poisoned_entry_wins_until_expiry() {
        let mut s = server();
        let bogus = IpAddr::new(198, 51, 100, 66);
        s.cache.install("files.example", bogus, 40);
        for now in [0, 20, 39] {
            assert_eq!(resolve(&mut s, "files.example", now).unwrap().0, bogus);
        }
        assert_eq!(resolve(&mut s, "files.example", 41).unwrap().0, IpAddr::new(203, 0, 113, 7));
    }
}
