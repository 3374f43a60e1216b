//! UDP messages and the two small services that can be looped into a
//! traffic spiral: echo on port 7 and chargen on port 19.

use serde::{Deserialize, Serialize};

use crate::symcrypto::Term;

pub const ECHO_PORT: u16 = 7;
pub const CHARGEN_PORT: u16 = 19;
pub const DNS_PORT: u16 = 53;
/// RIP-style route advertisements.
pub const ROUTE_PORT: u16 = 520;
/// Botnet control channel for the coordinated-flood scenario.
pub const BOTNET_PORT: u16 = 4444;

pub const CHARGEN_MAX: usize = 512;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UdpMessage {
    pub src_port: u16,
    pub dst_port: u16,
    pub data: Term,
}

impl UdpMessage {
    pub fn new(src_port: u16, dst_port: u16, data: Term) -> Self {
        UdpMessage { src_port, dst_port, data }
    }

    pub fn render(&self) -> String {
        format!("udp {}->{} {}", self.src_port, self.dst_port, self.data.render())
    }
}

/// Per-host service switches. Both loopable services default off; scenarios
/// enable them explicitly.
#[derive(Debug, Clone, Default)]
pub struct UdpServices {
    pub echo_enabled: bool,
    pub chargen_enabled: bool,
    /// Deterministic counter feeding chargen payload lengths.
    pub chargen_counter: u64,
}

/// Chargen reply length for one counter value: `(n * 131) mod 513`, which
/// sweeps every length in `[0, 512]` over a full period because 131 and
/// 513 are coprime.
pub fn chargen_len(counter: u64) -> usize {
    ((counter.wrapping_mul(131)) % (CHARGEN_MAX as u64 + 1)) as usize
}

/// Deterministic filler of the given length.
pub fn chargen_payload(len: usize) -> Vec<u8> {
    (0..len).map(|i| b'!' + (i % 90) as u8).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn chargen_lengths_stay_in_range() {
        for n in 0..2000u64 {
            assert!(chargen_len(n) <= CHARGEN_MAX);
        }
    }

    #[test]
    fn chargen_sweeps_every_length_in_one_period() {
        let seen: BTreeSet<usize> = (0..513u64).map(chargen_len).collect();
        assert_eq!(seen.len(), CHARGEN_MAX + 1);
        assert_eq!(seen.iter().next(), Some(&0));
        assert_eq!(seen.iter().last(), Some(&CHARGEN_MAX));
    }

    #[test]
    fn chargen_payload_is_printable_and_sized() {
        let p = chargen_payload(512);
        assert_eq!(p.len(), 512);
        assert!(p.iter().all(|b| b.is_ascii_graphic()));
    }
}
