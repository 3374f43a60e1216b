//! Symbolic cryptography.
//!
//! Encryption, hashing, MACs and certificates are modeled as inspectable
//! terms with exact algebraic laws instead of real ciphers: `open` undoes
//! `seal` only when the keys match, digests compare structurally, and a
//! certificate verifies only when its issuer is trusted. A sealed body is
//! opaque by convention: the only accessor that reveals it is [`open`]
//! with the matching key, which makes wire-secrecy claims decidable by
//! looking at rendered traces.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::derive;
use crate::stack::ip::IpDatagram;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CryptoError {
    #[error("key does not match the sealing key")]
    KeyMismatch,
    #[error("term is not sealed")]
    NotSealed,
    #[error("term is not a certificate")]
    NotACert,
}

/// What a key is for. A `(Public, owner, serial)` and `(Private, owner,
/// serial)` with equal owner and serial form a matched pair; symmetric
/// keys match only themselves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum KeyKind {
    Public,
    Private,
    Symmetric,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Key {
    pub kind: KeyKind,
    pub owner: String,
    pub serial: u64,
}

impl Key {
    pub fn pair(owner: &str, serial: u64) -> (Key, Key) {
        (
            Key { kind: KeyKind::Public, owner: owner.to_string(), serial },
            Key { kind: KeyKind::Private, owner: owner.to_string(), serial },
        )
    }

    pub fn symmetric(owner: &str, serial: u64) -> Key {
        Key { kind: KeyKind::Symmetric, owner: owner.to_string(), serial }
    }

    /// Secret key derived from a password by a one-way function. The
    /// password itself never appears in the key's rendering; a wrong
    /// password yields a different serial and therefore a mismatching key.
    pub fn from_password(owner: &str, password: &str) -> Key {
        let serial = derive::u64_from("pwkey", 0, &[owner, password]);
        Key::symmetric(&format!("pw:{owner}"), serial)
    }

    pub fn is_symmetric(&self) -> bool {
        self.kind == KeyKind::Symmetric
    }

    /// True when `self` opens a term sealed under `sealer`.
    fn opens(&self, sealer: &Key) -> bool {
        if self.owner != sealer.owner || self.serial != sealer.serial {
            return false;
        }
        matches!(
            (sealer.kind, self.kind),
            (KeyKind::Public, KeyKind::Private)
                | (KeyKind::Private, KeyKind::Public)
                | (KeyKind::Symmetric, KeyKind::Symmetric)
        )
    }
}

impl fmt::Display for Key {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            KeyKind::Public => "pub",
            KeyKind::Private => "prv",
            KeyKind::Symmetric => "sym",
        };
        write!(f, "{}:{}#{}", kind, self.owner, self.serial)
    }
}

/// Allocates running serials per owner so repeated key generation yields
/// `#1`, `#2`, ... deterministically.
#[derive(Debug, Default, Clone)]
pub struct Keyring {
    counters: BTreeMap<String, u64>,
}

impl Keyring {
    pub fn new() -> Self {
        Self::default()
    }

    fn next(&mut self, owner: &str) -> u64 {
        let c = self.counters.entry(owner.to_string()).or_insert(0);
        *c += 1;
        *c
    }

    pub fn keygen_pair(&mut self, owner: &str) -> (Key, Key) {
        let serial = self.next(owner);
        Key::pair(owner, serial)
    }

    pub fn keygen_symmetric(&mut self, owner: &str) -> Key {
        let serial = self.next(owner);
        Key::symmetric(owner, serial)
    }
}

/// A symbolic value. All "encryption" in the simulator is construction of
/// one of these.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Term {
    Plain(Vec<u8>),
    Sealed(Key, Box<Term>),
    Digest(Box<Term>),
    Mac(Key, Box<Term>),
    Cert { subject: String, public: Key, issuer: String },
    Pair(Box<Term>, Box<Term>),
    /// A key circulating as message content (session keys in handshakes).
    Key(Key),
    /// A whole datagram circulating as message content (IP-in-IP tunnels,
    /// transport payloads under ESP).
    Datagram(Box<IpDatagram>),
}

impl Term {
    pub fn plain(text: &str) -> Term {
        Term::Plain(text.as_bytes().to_vec())
    }

    pub fn int(value: u64) -> Term {
        Term::plain(&value.to_string())
    }

    pub fn pair(left: Term, right: Term) -> Term {
        Term::Pair(Box::new(left), Box::new(right))
    }

    /// Right-folds a list into nested pairs; a single item stays itself.
    pub fn list(mut items: Vec<Term>) -> Term {
        let Some(mut acc) = items.pop() else {
            return Term::plain("");
        };
        while let Some(item) = items.pop() {
            acc = Term::pair(item, acc);
        }
        acc
    }

    pub fn as_plain(&self) -> Option<&[u8]> {
        match self {
            Term::Plain(b) => Some(b),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        std::str::from_utf8(self.as_plain()?).ok()
    }

    pub fn as_int(&self) -> Option<u64> {
        self.as_str()?.parse().ok()
    }

    pub fn as_pair(&self) -> Option<(&Term, &Term)> {
        match self {
            Term::Pair(a, b) => Some((a, b)),
            _ => None,
        }
    }

    pub fn as_key(&self) -> Option<&Key> {
        match self {
            Term::Key(k) => Some(k),
            _ => None,
        }
    }

    pub fn as_datagram(&self) -> Option<&IpDatagram> {
        match self {
            Term::Datagram(d) => Some(d),
            _ => None,
        }
    }

    pub fn is_sealed(&self) -> bool {
        matches!(self, Term::Sealed(_, _))
    }

    /// Identity of the sealing key, without handing out the key itself.
    pub fn sealing_key(&self) -> Option<String> {
        match self {
            Term::Sealed(k, _) => Some(k.to_string()),
            _ => None,
        }
    }

    /// Canonical structural string, including bodies of digests and MACs.
    /// Internal: used for structural hashing, never shown in traces.
    fn canonical(&self) -> String {
        match self {
            Term::Plain(b) => format!("P({})", hex(b)),
            Term::Sealed(k, t) => format!("S({k},{})", t.canonical()),
            Term::Digest(t) => format!("D({})", t.canonical()),
            Term::Mac(k, t) => format!("M({k},{})", t.canonical()),
            Term::Cert { subject, public, issuer } => {
                format!("C({subject},{public},{issuer})")
            }
            Term::Pair(a, b) => format!("T({},{})", a.canonical(), b.canonical()),
            Term::Key(k) => format!("K({k})"),
            Term::Datagram(d) => format!("G({})", d.render()),
        }
    }

    fn structural_hash(&self) -> String {
        let d = derive::digest(&[&self.canonical()]);
        hex(&d[..4])
    }

    /// Deterministic nested prefix rendering used in traces. Sealed bodies
    /// are shown (assertions check what appears *outside* `Sealed(...)`);
    /// digest and MAC bodies render as structural hashes, since those
    /// values are one-way.
    pub fn render(&self) -> String {
        match self {
            Term::Plain(b) => match printable(b) {
                Some(s) => format!("Plain({s:?})"),
                None => format!("Plain[len={}]", b.len()),
            },
            Term::Sealed(k, t) => format!("Sealed({k},{})", t.render()),
            Term::Digest(_) => format!("Digest#{}", self.structural_hash()),
            Term::Mac(k, _) => format!("Mac({k},#{})", self.structural_hash()),
            Term::Cert { subject, public, issuer } => {
                format!("Cert({subject},{public},{issuer})")
            }
            Term::Pair(a, b) => format!("Pair({},{})", a.render(), b.render()),
            Term::Key(k) => format!("Key({k})"),
            Term::Datagram(d) => format!("Dgram({})", d.render()),
        }
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn printable(bytes: &[u8]) -> Option<&str> {
    if bytes.len() > 48 {
        return None;
    }
    let s = std::str::from_utf8(bytes).ok()?;
    if s.chars().all(|c| !c.is_control()) {
        Some(s)
    } else {
        None
    }
}

pub fn seal(key: &Key, body: Term) -> Term {
    Term::Sealed(key.clone(), Box::new(body))
}

pub fn open(key: &Key, term: &Term) -> Result<Term, CryptoError> {
    match term {
        Term::Sealed(sealer, body) => {
            if key.opens(sealer) {
                Ok((**body).clone())
            } else {
                Err(CryptoError::KeyMismatch)
            }
        }
        _ => Err(CryptoError::NotSealed),
    }
}

pub fn digest(body: Term) -> Term {
    Term::Digest(Box::new(body))
}

pub fn mac(key: &Key, body: Term) -> Term {
    assert!(key.is_symmetric(), "mac requires a symmetric key");
    Term::Mac(key.clone(), Box::new(body))
}

pub fn mac_verify(key: &Key, body: &Term, candidate: &Term) -> bool {
    match candidate {
        Term::Mac(k, b) => k == key && &**b == body,
        _ => false,
    }
}

pub fn cert_issue(ca: &str, subject: &str, public: &Key) -> Term {
    Term::Cert {
        subject: subject.to_string(),
        public: public.clone(),
        issuer: ca.to_string(),
    }
}

pub fn cert_verify(store: &TrustStore, cert: &Term) -> Result<bool, CryptoError> {
    match cert {
        Term::Cert { issuer, .. } => Ok(store.trusted_issuers.contains(issuer)),
        _ => Err(CryptoError::NotACert),
    }
}

/// Key agreement over two exchanged contributions; commutative in its
/// arguments, so both sides derive the same symmetric key.
pub fn dh_agree(a_contrib: &Term, b_contrib: &Term) -> Key {
    let mut sides = [a_contrib.canonical(), b_contrib.canonical()];
    sides.sort();
    let serial = derive::u64_from("dh", 0, &[&sides[0], &sides[1]]);
    Key::symmetric("dh", serial)
}

/// Labeled key derivation: a distinct symmetric key bound to the parent
/// key and the derivation function's name.
pub fn kdf(alg: &str, session_key: &Key) -> Key {
    let serial = derive::u64_from("kdf", session_key.serial, &[alg, &session_key.owner]);
    Key::symmetric(&format!("kdf-{alg}({})", session_key.owner), serial)
}

/// Issuer trust plus pinned host keys (the "list of known hosts").
#[derive(Debug, Clone, Default)]
pub struct TrustStore {
    pub trusted_issuers: BTreeSet<String>,
    known_hosts: BTreeMap<String, Key>,
}

impl TrustStore {
    pub fn with_issuer(issuer: &str) -> Self {
        let mut s = Self::default();
        s.trusted_issuers.insert(issuer.to_string());
        s
    }

    pub fn known_host(&self, host: &str) -> Option<&Key> {
        self.known_hosts.get(host)
    }

    /// Insert-only: known hosts grow monotonically within a session.
    pub fn add_known_host(&mut self, host: &str, key: Key) {
        self.known_hosts.insert(host.to_string(), key);
    }
}

/// Algorithm metadata: a strength rank (higher wins negotiation), the MAC
/// length it produces, and its cipher block size where applicable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AlgInfo {
    pub rank: u32,
    pub mac_len: Option<usize>,
    pub block: Option<usize>,
}

/// Named-algorithm registry. "Strength" is an integer rank attached to
/// each name; negotiation picks the highest-ranked common entry.
#[derive(Debug, Clone)]
pub struct AlgCatalog {
    entries: BTreeMap<String, AlgInfo>,
}

impl Default for AlgCatalog {
    fn default() -> Self {
        let mut entries = BTreeMap::new();
        let mut put = |name: &str, rank: u32, mac_len: Option<usize>, block: Option<usize>| {
            entries.insert(name.to_string(), AlgInfo { rank, mac_len, block });
        };
        put("mac-64", 1, Some(8), None);
        put("mac-96", 2, Some(12), None);
        put("mac-128", 3, Some(16), None);
        put("enc-a", 1, None, Some(4));
        put("enc-b", 2, None, Some(4));
        put("enc-c", 3, None, Some(8));
        put("kdf-a", 1, None, None);
        put("kdf-b", 2, None, None);
        put("suite-a", 1, None, None);
        put("suite-b", 2, None, None);
        put("suite-c", 3, None, None);
        Self { entries }
    }
}

impl AlgCatalog {
    pub fn set(&mut self, name: &str, info: AlgInfo) {
        self.entries.insert(name.to_string(), info);
    }

    pub fn rank(&self, name: &str) -> u32 {
        self.entries.get(name).map(|i| i.rank).unwrap_or(0)
    }

    pub fn mac_len(&self, name: &str) -> usize {
        self.entries.get(name).and_then(|i| i.mac_len).unwrap_or(12)
    }

    pub fn block(&self, name: &str) -> usize {
        self.entries.get(name).and_then(|i| i.block).unwrap_or(4)
    }

    /// Highest-ranked element of `offered ∩ supported`; rank ties break by
    /// name so the choice is unique.
    pub fn pick_strongest<'a, I, J>(&self, offered: I, supported: J) -> Option<String>
    where
        I: IntoIterator<Item = &'a String>,
        J: IntoIterator<Item = &'a String>,
    {
        let supported: BTreeSet<&String> = supported.into_iter().collect();
        offered
            .into_iter()
            .filter(|name| supported.contains(name))
            .max_by_key(|name| (self.rank(name), name.to_string()))
            .cloned()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn keys() -> (Key, Key, Key) {
        let (public, private) = Key::pair("B", 1);
        (public, private, Key::symmetric("k", 1))
    }

    #[test]
    fn open_undoes_seal_with_matching_private_key() {
        let (public, private, _) = keys();
        let msg = Term::plain("hi");
        assert_eq!(open(&private, &seal(&public, msg.clone())), Ok(msg));
    }

    #[test]
    fn open_with_wrong_owner_fails() {
        let (public, _, _) = keys();
        let (_, other_private) = Key::pair("C", 1);
        let sealed = seal(&public, Term::plain("m"));
        assert_eq!(open(&other_private, &sealed), Err(CryptoError::KeyMismatch));
    }

    #[test]
    fn signature_style_seal_opens_with_public_key() {
        let (public, private, _) = keys();
        let msg = Term::plain("signed");
        assert_eq!(open(&public, &seal(&private, msg.clone())), Ok(msg));
    }

    #[test]
    fn symmetric_seal_round_trip() {
        let (_, _, sym) = keys();
        let msg = Term::plain("s");
        assert_eq!(open(&sym, &seal(&sym, msg.clone())), Ok(msg));
        assert_eq!(
            open(&Key::symmetric("k", 2), &seal(&sym, msg)),
            Err(CryptoError::KeyMismatch)
        );
    }

    #[test]
    fn nested_seal_needs_both_opens() {
        let (public, private, sym) = keys();
        let inner = seal(&sym, Term::plain("deep"));
        let outer = seal(&public, inner.clone());
        assert_eq!(open(&private, &outer), Ok(inner));
    }

    #[test]
    fn open_of_non_sealed_is_an_error() {
        let (_, private, _) = keys();
        assert_eq!(open(&private, &Term::plain("x")), Err(CryptoError::NotSealed));
    }

    #[test]
    fn digest_equality_is_structural() {
        let m = Term::plain("m");
        assert_eq!(digest(m.clone()), digest(m));
        assert_ne!(digest(Term::plain("m")), digest(Term::plain("n")));
    }

    #[test]
    fn mac_verifies_only_with_same_key_and_body() {
        let k = Key::symmetric("k", 1);
        let other = Key::symmetric("k", 2);
        let body = Term::plain("data");
        let tag = mac(&k, body.clone());
        assert!(mac_verify(&k, &body, &tag));
        assert!(!mac_verify(&other, &body, &tag));
        assert!(!mac_verify(&k, &Term::plain("tampered"), &tag));
    }

    #[test]
    fn cert_verify_requires_trusted_issuer() {
        let (public, _) = Key::pair("S", 1);
        let store = TrustStore::with_issuer("RootCA");
        let good = cert_issue("RootCA", "S", &public);
        let bad = cert_issue("M-CA", "S", &public);
        assert_eq!(cert_verify(&store, &good), Ok(true));
        assert_eq!(cert_verify(&store, &bad), Ok(false));
        assert_eq!(cert_verify(&store, &Term::plain("x")), Err(CryptoError::NotACert));
    }

    #[test]
    fn dh_is_commutative_and_injective_enough() {
        let a = Term::plain("ga");
        let b = Term::plain("gb");
        let c = Term::plain("gc");
        assert_eq!(dh_agree(&a, &b), dh_agree(&b, &a));
        assert_ne!(dh_agree(&a, &b), dh_agree(&a, &c));
        let k = dh_agree(&a, &b);
        assert!(mac_verify(&k, &a, &mac(&k, a.clone())));
    }

    #[test]
    fn keyring_serials_advance() {
        let mut ring = Keyring::new();
        let (p1, _) = ring.keygen_pair("B");
        let (p2, _) = ring.keygen_pair("B");
        assert_eq!(p1.serial, 1);
        assert_eq!(p2.serial, 2);
        assert_eq!(ring.keygen_symmetric("B").serial, 3);
    }

    #[test]
    fn password_key_hides_password_but_depends_on_it() {
        let k1 = Key::from_password("alice", "hunter2");
        let k2 = Key::from_password("alice", "hunter3");
        assert_ne!(k1, k2);
        assert!(!k1.to_string().contains("hunter2"));
    }

    #[test]
    fn pick_strongest_takes_max_rank_of_intersection() {
        let catalog = AlgCatalog::default();
        let offered: Vec<String> =
            ["enc-b", "enc-a"].iter().map(|s| s.to_string()).collect();
        let supported: Vec<String> =
            ["enc-a", "enc-b", "enc-c"].iter().map(|s| s.to_string()).collect();
        assert_eq!(catalog.pick_strongest(&offered, &supported), Some("enc-b".into()));
        let none: Vec<String> = vec![];
        assert_eq!(catalog.pick_strongest(&offered, &none), None);
    }

    #[test]
    fn render_shows_sealed_bodies_but_not_digest_preimages() {
        let (public, _) = Key::pair("B", 1);
        let sealed = seal(&public, Term::plain("hi"));
        assert_eq!(sealed.render(), "Sealed(pub:B#1,Plain(\"hi\"))");
        let d = digest(Term::plain("secret"));
        assert!(!d.render().contains("secret"));
    }

    #[test]
    fn list_folds_right() {
        let t = Term::list(vec![Term::int(1), Term::int(2), Term::int(3)]);
        let (a, rest) = t.as_pair().unwrap();
        assert_eq!(a.as_int(), Some(1));
        let (b, c) = rest.as_pair().unwrap();
        assert_eq!(b.as_int(), Some(2));
        assert_eq!(c.as_int(), Some(3));
    }
}
