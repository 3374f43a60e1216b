//! TCP: three-way handshake, sequence/acknowledgment arithmetic, a bounded
//! SYN_RECV queue, and the duplicate-ACK exchange that a desynchronized
//! session degenerates into.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::derive;
use crate::simnet::{Action, Layer, Network, NodeId};
use crate::stack::ip::{proto, IpAddr, IpDatagram, Payload};
use crate::stack::udp::{chargen_len, chargen_payload, CHARGEN_PORT};

pub const DEFAULT_WINDOW: u32 = 512;
pub const DEFAULT_SYN_QUEUE_CAPACITY: usize = 8;
pub const DEFAULT_SYN_TIMEOUT: u64 = 8;
pub const DEFAULT_STORM_THRESHOLD: u32 = 5;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TcpError {
    #[error("connection is not established")]
    NotEstablished,
    #[error("no listener on the requested port")]
    NoListener,
    #[error("no such connection")]
    UnknownConn,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TcpFlags {
    pub syn: bool,
    pub ack: bool,
    pub fin: bool,
    pub rst: bool,
}

impl TcpFlags {
    pub const SYN: TcpFlags = TcpFlags { syn: true, ack: false, fin: false, rst: false };
    pub const ACK: TcpFlags = TcpFlags { syn: false, ack: true, fin: false, rst: false };
    pub const SYN_ACK: TcpFlags = TcpFlags { syn: true, ack: true, fin: false, rst: false };
    pub const FIN: TcpFlags = TcpFlags { syn: false, ack: false, fin: true, rst: false };
    pub const RST: TcpFlags = TcpFlags { syn: false, ack: false, fin: false, rst: true };
}

impl fmt::Display for TcpFlags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if self.syn {
            parts.push("SYN");
        }
        if self.ack {
            parts.push("ACK");
        }
        if self.fin {
            parts.push("FIN");
        }
        if self.rst {
            parts.push("RST");
        }
        if parts.is_empty() {
            write!(f, "-")
        } else {
            write!(f, "{}", parts.join("|"))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TcpSegment {
    pub src_port: u16,
    pub dst_port: u16,
    pub seq: u32,
    pub ack: u32,
    pub flags: TcpFlags,
    pub window: u32,
    pub data: Vec<u8>,
}

impl TcpSegment {
    pub fn render(&self) -> String {
        let mut s = format!(
            "tcp {}->{} seq={} ack={} flags={} len={} wnd={}",
            self.src_port,
            self.dst_port,
            self.seq,
            self.ack,
            self.flags,
            self.data.len(),
            self.window
        );
        if !self.data.is_empty() {
            if let Ok(text) = std::str::from_utf8(&self.data) {
                if text.len() <= 48 && text.chars().all(|c| !c.is_control()) {
                    s.push_str(&format!(" data={text:?}"));
                }
            }
        }
        s
    }
}

/// The session-identifying quadruple, oriented client (initiator) first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Quad {
    pub client_ip: IpAddr,
    pub client_port: u16,
    pub server_ip: IpAddr,
    pub server_port: u16,
}

impl Quad {
    pub fn render(&self) -> String {
        format!(
            "{}:{}<->{}:{}",
            self.client_ip, self.client_port, self.server_ip, self.server_port
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TcpState {
    Closed,
    SynSent,
    SynRecv,
    Established,
    Closing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Client,
    Server,
}

#[derive(Debug, Clone)]
pub struct TcpConn {
    pub quad: Quad,
    pub role: Role,
    pub state: TcpState,
    pub snd_nxt: u32,
    pub rcv_nxt: u32,
    pub resync_count: u32,
    pub storm_threshold: u32,
    /// Serve a character stream on this connection (TCP chargen).
    pub chargen_stream: bool,
}

impl TcpConn {
    fn peer_ip(&self) -> IpAddr {
        match self.role {
            Role::Client => self.quad.server_ip,
            Role::Server => self.quad.client_ip,
        }
    }

    fn local_port(&self) -> u16 {
        match self.role {
            Role::Client => self.quad.client_port,
            Role::Server => self.quad.server_port,
        }
    }

    fn peer_port(&self) -> u16 {
        match self.role {
            Role::Client => self.quad.server_port,
            Role::Server => self.quad.client_port,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Admit {
    Admitted,
    Discarded,
}

/// The queue of half-open connections a server keeps between sending a
/// SYN/ACK and seeing the final ACK.
#[derive(Debug, Clone)]
pub struct SynRecvQueue {
    pub capacity: usize,
    pub timeout: u64,
    entries: Vec<(Quad, u64)>,
}

impl Default for SynRecvQueue {
    fn default() -> Self {
        SynRecvQueue {
            capacity: DEFAULT_SYN_QUEUE_CAPACITY,
            timeout: DEFAULT_SYN_TIMEOUT,
            entries: Vec::new(),
        }
    }
}

impl SynRecvQueue {
    /// Purge entries older than the timeout, then admit the request iff
    /// the queue still has room. Admission records the entry.
    pub fn admit(&mut self, quad: Quad, now: u64) -> Admit {
        self.purge(now);
        if self.entries.iter().any(|(q, _)| *q == quad) {
            return Admit::Admitted;
        }
        if self.entries.len() < self.capacity {
            self.entries.push((quad, now));
            Admit::Admitted
        } else {
            Admit::Discarded
        }
    }

    fn purge(&mut self, now: u64) {
        let timeout = self.timeout;
        self.entries.retain(|(_, created)| now.saturating_sub(*created) <= timeout);
    }

    pub fn remove(&mut self, quad: &Quad) {
        self.entries.retain(|(q, _)| q != quad);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Per-node TCP state.
#[derive(Debug, Clone, Default)]
pub struct TcpHost {
    pub listening: BTreeSet<u16>,
    pub conns: BTreeMap<Quad, TcpConn>,
    pub syn_queue: SynRecvQueue,
    pub isn_counter: u64,
    pub storm_threshold: u32,
}

impl TcpHost {
    pub fn conn(&self, quad: &Quad) -> Option<&TcpConn> {
        self.conns.get(quad)
    }
}

fn next_isn(net: &mut Network, node: NodeId) -> u32 {
    let seed = net.seed;
    let name = net.node(node).name.clone();
    let host = net.node_mut(node);
    host.tcp.isn_counter += 1;
    let counter = host.tcp.isn_counter.to_string();
    derive::u32_from("isn", seed, &[&name, &counter])
}

fn segment_detail(local: IpAddr, peer: IpAddr, seg: &TcpSegment, marker: Option<&str>) -> String {
    let mut detail = format!("{} {}", seg.render(), format_args!("[{local}->{peer}]"));
    if let Some(m) = marker {
        detail.push(' ');
        detail.push_str(m);
    }
    detail
}

/// Emit the transport-layer send event and hand the segment to the IP
/// layer (wrapping it in AH/ESP first when the flow is protected).
fn send_segment(
    net: &mut Network,
    node: NodeId,
    local: IpAddr,
    peer: IpAddr,
    seg: TcpSegment,
    marker: Option<&str>,
) {
    net.emit(Some(node), Action::Send, Layer::Transport, segment_detail(local, peer, &seg, marker));
    let dgram = IpDatagram::new(local, peer, proto::TCP, Payload::Tcp(seg));
    let dgram = crate::ipsec::outbound_wrap(net, node, dgram);
    net.send_datagram(node, dgram);
}

/// Initiate a connection: pick a deterministic ISN, set SYN_SENT and send
/// the SYN.
pub fn start_open(net: &mut Network, client: NodeId, server_ip: IpAddr, src_port: u16, dst_port: u16) {
    let local = net.addr_facing(client, server_ip);
    let isn = next_isn(net, client);
    let quad = Quad {
        client_ip: local,
        client_port: src_port,
        server_ip,
        server_port: dst_port,
    };
    let threshold = net.node(client).tcp.storm_threshold;
    let conn = TcpConn {
        quad,
        role: Role::Client,
        state: TcpState::SynSent,
        snd_nxt: isn.wrapping_add(1),
        rcv_nxt: 0,
        resync_count: 0,
        storm_threshold: threshold,
        chargen_stream: false,
    };
    net.node_mut(client).tcp.conns.insert(quad, conn);
    let seg = TcpSegment {
        src_port,
        dst_port,
        seq: isn,
        ack: 0,
        flags: TcpFlags::SYN,
        window: DEFAULT_WINDOW,
        data: Vec::new(),
    };
    send_segment(net, client, local, server_ip, seg, None);
}

/// Send application data on an established connection.
pub fn send_data(net: &mut Network, node: NodeId, quad: &Quad, data: &[u8]) -> Result<(), TcpError> {
    let conn = net
        .node(node)
        .tcp
        .conns
        .get(quad)
        .cloned()
        .ok_or(TcpError::UnknownConn)?;
    if conn.state != TcpState::Established {
        return Err(TcpError::NotEstablished);
    }
    let seg = TcpSegment {
        src_port: conn.local_port(),
        dst_port: conn.peer_port(),
        seq: conn.snd_nxt,
        ack: conn.rcv_nxt,
        flags: TcpFlags::ACK,
        window: DEFAULT_WINDOW,
        data: data.to_vec(),
    };
    // An empty payload consumes no sequence number.
    let local = net.addr_facing(node, conn.peer_ip());
    if !data.is_empty() {
        let entry = net.node_mut(node).tcp.conns.get_mut(quad).unwrap();
        entry.snd_nxt = entry.snd_nxt.wrapping_add(data.len() as u32);
    }
    send_segment(net, node, local, conn.peer_ip(), seg, None);
    Ok(())
}

fn emit_queue_note(net: &mut Network, node: NodeId, verdict: &str) {
    let (len, cap) = {
        let q = &net.node(node).tcp.syn_queue;
        (q.len(), q.capacity)
    };
    net.emit(
        Some(node),
        Action::Note,
        Layer::Transport,
        format!("syn-queue len={len} cap={cap} {verdict}"),
    );
}

fn chargen_next(net: &mut Network, node: NodeId, quad: Quad) {
    let counter = {
        let host = net.node_mut(node);
        host.udp.chargen_counter += 1;
        host.udp.chargen_counter
    };
    let data = chargen_payload(chargen_len(counter));
    let _ = send_data(net, node, &quad, &data);
}

/// The receive-side state machine. `src`/`dst` are the addresses of the
/// datagram that carried the segment; spoofed values are taken at face
/// value, which is exactly what the attacks rely on.
pub fn on_segment(net: &mut Network, node: NodeId, src: IpAddr, dst: IpAddr, seg: TcpSegment) {
    let detail = segment_detail(dst, src, &seg, None);
    net.emit(Some(node), Action::Recv, Layer::Transport, detail);

    let quad_fwd = Quad {
        client_ip: src,
        client_port: seg.src_port,
        server_ip: dst,
        server_port: seg.dst_port,
    };
    let quad_rev = Quad {
        client_ip: dst,
        client_port: seg.dst_port,
        server_ip: src,
        server_port: seg.src_port,
    };

    if seg.flags.rst {
        let host = net.node_mut(node);
        let removed = host.tcp.conns.remove(&quad_fwd).or_else(|| host.tcp.conns.remove(&quad_rev));
        if let Some(conn) = removed {
            net.node_mut(node).tcp.syn_queue.remove(&conn.quad);
            net.emit(
                Some(node),
                Action::Note,
                Layer::Transport,
                format!("conn reset {}", conn.quad.render()),
            );
        }
        return;
    }

    if seg.flags.syn && !seg.flags.ack {
        handle_syn(net, node, quad_fwd, seg);
        return;
    }

    if seg.flags.syn && seg.flags.ack {
        handle_syn_ack(net, node, quad_rev, seg);
        return;
    }

    if seg.flags.fin {
        handle_fin(net, node, quad_fwd, quad_rev, seg);
        return;
    }

    handle_ack_or_data(net, node, quad_fwd, quad_rev, seg);
}

fn handle_syn(net: &mut Network, node: NodeId, quad: Quad, seg: TcpSegment) {
    if !net.node(node).tcp.listening.contains(&seg.dst_port) {
        // No listener: refuse with RST.
        let local = quad.server_ip;
        let rst = TcpSegment {
            src_port: seg.dst_port,
            dst_port: seg.src_port,
            seq: 0,
            ack: seg.seq.wrapping_add(1),
            flags: TcpFlags::RST,
            window: 0,
            data: Vec::new(),
        };
        send_segment(net, node, local, quad.client_ip, rst, None);
        return;
    }
    let now = net.clock();
    let verdict = net.node_mut(node).tcp.syn_queue.admit(quad, now);
    match verdict {
        Admit::Discarded => {
            emit_queue_note(net, node, "discarded");
            net.emit(
                Some(node),
                Action::Drop,
                Layer::Transport,
                format!("syn-queue-full {}", quad.render()),
            );
        }
        Admit::Admitted => {
            emit_queue_note(net, node, "admitted");
            let isn = next_isn(net, node);
            let chargen_stream =
                quad.server_port == CHARGEN_PORT && net.node(node).udp.chargen_enabled;
            let threshold = net.node(node).tcp.storm_threshold;
            let conn = TcpConn {
                quad,
                role: Role::Server,
                state: TcpState::SynRecv,
                snd_nxt: isn.wrapping_add(1),
                rcv_nxt: seg.seq.wrapping_add(1),
                resync_count: 0,
                storm_threshold: threshold,
                chargen_stream,
            };
            net.node_mut(node).tcp.conns.insert(quad, conn);
            let syn_ack = TcpSegment {
                src_port: quad.server_port,
                dst_port: quad.client_port,
                seq: isn,
                ack: seg.seq.wrapping_add(1),
                flags: TcpFlags::SYN_ACK,
                window: DEFAULT_WINDOW,
                data: Vec::new(),
            };
            send_segment(net, node, quad.server_ip, quad.client_ip, syn_ack, None);
        }
    }
}

fn handle_syn_ack(net: &mut Network, node: NodeId, quad: Quad, seg: TcpSegment) {
    let Some(conn) = net.node(node).tcp.conns.get(&quad).cloned() else {
        return;
    };
    if conn.state != TcpState::SynSent || seg.ack != conn.snd_nxt {
        net.emit(
            Some(node),
            Action::Drop,
            Layer::Transport,
            format!("unexpected-syn-ack {}", quad.render()),
        );
        return;
    }
    {
        let entry = net.node_mut(node).tcp.conns.get_mut(&quad).unwrap();
        entry.rcv_nxt = seg.seq.wrapping_add(1);
        entry.state = TcpState::Established;
    }
    let ack = TcpSegment {
        src_port: quad.client_port,
        dst_port: quad.server_port,
        seq: conn.snd_nxt,
        ack: seg.seq.wrapping_add(1),
        flags: TcpFlags::ACK,
        window: DEFAULT_WINDOW,
        data: Vec::new(),
    };
    send_segment(net, node, quad.client_ip, quad.server_ip, ack, None);
}

fn handle_fin(net: &mut Network, node: NodeId, quad_fwd: Quad, quad_rev: Quad, seg: TcpSegment) {
    let host = net.node_mut(node);
    let (quad, removed) = if host.tcp.conns.contains_key(&quad_fwd) {
        (quad_fwd, host.tcp.conns.remove(&quad_fwd))
    } else {
        (quad_rev, host.tcp.conns.remove(&quad_rev))
    };
    let Some(conn) = removed else {
        return;
    };
    let local = if conn.role == Role::Client { quad.client_ip } else { quad.server_ip };
    let ack = TcpSegment {
        src_port: conn.local_port(),
        dst_port: conn.peer_port(),
        seq: conn.snd_nxt,
        ack: seg.seq.wrapping_add(1),
        flags: TcpFlags::ACK,
        window: DEFAULT_WINDOW,
        data: Vec::new(),
    };
    let peer = conn.peer_ip();
    net.emit(
        Some(node),
        Action::Note,
        Layer::Transport,
        format!("conn closed by fin {}", quad.render()),
    );
    send_segment(net, node, local, peer, ack, None);
}

fn handle_ack_or_data(net: &mut Network, node: NodeId, quad_fwd: Quad, quad_rev: Quad, seg: TcpSegment) {
    let (quad, conn) = {
        let host = net.node(node);
        if let Some(c) = host.tcp.conns.get(&quad_fwd) {
            (quad_fwd, c.clone())
        } else if let Some(c) = host.tcp.conns.get(&quad_rev) {
            (quad_rev, c.clone())
        } else {
            net.emit(
                Some(node),
                Action::Drop,
                Layer::Transport,
                format!("no-connection {}", quad_fwd.render()),
            );
            return;
        }
    };
    let local = if conn.role == Role::Client { quad.client_ip } else { quad.server_ip };
    let peer = conn.peer_ip();

    if conn.state == TcpState::SynRecv && seg.data.is_empty() {
        if seg.ack == conn.snd_nxt {
            {
                let entry = net.node_mut(node).tcp.conns.get_mut(&quad).unwrap();
                entry.state = TcpState::Established;
            }
            net.node_mut(node).tcp.syn_queue.remove(&quad);
            emit_queue_note(net, node, "completed");
            if conn.chargen_stream {
                chargen_next(net, node, quad);
            }
        }
        return;
    }

    if conn.state != TcpState::Established {
        return;
    }

    if !seg.data.is_empty() {
        if seg.seq == conn.rcv_nxt {
            let len = seg.data.len() as u32;
            {
                let entry = net.node_mut(node).tcp.conns.get_mut(&quad).unwrap();
                entry.rcv_nxt = entry.rcv_nxt.wrapping_add(len);
            }
            let rendered = match std::str::from_utf8(&seg.data) {
                Ok(t) if t.len() <= 48 && t.chars().all(|c| !c.is_control()) => {
                    format!("{t:?}")
                }
                _ => format!("[len={}]", seg.data.len()),
            };
            net.emit(
                Some(node),
                Action::Recv,
                Layer::Application,
                format!("app data={rendered} from={}:{}", peer, seg.src_port),
            );
            let ack = TcpSegment {
                src_port: conn.local_port(),
                dst_port: conn.peer_port(),
                seq: conn.snd_nxt,
                ack: conn.rcv_nxt.wrapping_add(len),
                flags: TcpFlags::ACK,
                window: DEFAULT_WINDOW,
                data: Vec::new(),
            };
            send_segment(net, node, local, peer, ack, None);
        } else {
            // Out-of-window data: repeat the acknowledgment we already
            // hold so the peer can resynchronize.
            let ack = TcpSegment {
                src_port: conn.local_port(),
                dst_port: conn.peer_port(),
                seq: conn.snd_nxt,
                ack: conn.rcv_nxt,
                flags: TcpFlags::ACK,
                window: DEFAULT_WINDOW,
                data: Vec::new(),
            };
            send_segment(net, node, local, peer, ack, Some("dup-ack"));
        }
        return;
    }

    // Pure acknowledgment.
    if seg.ack != conn.snd_nxt {
        // The peer acknowledged data we never sent: the session is
        // desynchronized. Try to resynchronize a bounded number of times,
        // then give up and close.
        if conn.resync_count >= conn.storm_threshold {
            net.node_mut(node).tcp.conns.remove(&quad);
            net.emit(
                Some(node),
                Action::Note,
                Layer::Transport,
                format!("conn-closed resync-exhausted {}", quad.render()),
            );
            return;
        }
        {
            let entry = net.node_mut(node).tcp.conns.get_mut(&quad).unwrap();
            entry.resync_count += 1;
        }
        let ack = TcpSegment {
            src_port: conn.local_port(),
            dst_port: conn.peer_port(),
            seq: conn.snd_nxt,
            ack: conn.rcv_nxt,
            flags: TcpFlags::ACK,
            window: DEFAULT_WINDOW,
            data: Vec::new(),
        };
        send_segment(net, node, local, peer, ack, Some("resync"));
        return;
    }

    if seg.seq != conn.rcv_nxt {
        // Stale sequence number on a pure ACK: resend our previous
        // acknowledgment.
        let ack = TcpSegment {
            src_port: conn.local_port(),
            dst_port: conn.peer_port(),
            seq: conn.snd_nxt,
            ack: conn.rcv_nxt,
            flags: TcpFlags::ACK,
            window: DEFAULT_WINDOW,
            data: Vec::new(),
        };
        send_segment(net, node, local, peer, ack, Some("dup-ack"));
        return;
    }

    // In-sequence acknowledgment of our data.
    if conn.chargen_stream {
        chargen_next(net, node, quad);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn addr(d: u8) -> IpAddr {
        IpAddr::new(10, 0, 0, d)
    }

    fn quad(n: u16) -> Quad {
        Quad { client_ip: addr(1), client_port: n, server_ip: addr(2), server_port: 80 }
    }

    #[test]
    fn syn_queue_admits_until_capacity() {
        let mut q = SynRecvQueue { capacity: 8, timeout: 8, entries: Vec::new() };
        for n in 0..7 {
            assert_eq!(q.admit(quad(n), 0), Admit::Admitted);
        }
        assert_eq!(q.admit(quad(7), 0), Admit::Admitted);
        assert_eq!(q.admit(quad(8), 0), Admit::Discarded);
        assert_eq!(q.len(), 8);
    }

    #[test]
    fn syn_queue_purges_expired_entries_before_deciding() {
        let mut q = SynRecvQueue { capacity: 8, timeout: 8, entries: Vec::new() };
        for n in 0..8 {
            assert_eq!(q.admit(quad(n), 0), Admit::Admitted);
        }
        assert_eq!(q.admit(quad(100), 8), Admit::Discarded);
        assert_eq!(q.admit(quad(100), 9), Admit::Admitted);
        assert_eq!(q.len(), 1);
    }

    #[test]
    fn syn_queue_duplicate_request_is_not_double_counted() {
        let mut q = SynRecvQueue::default();
        assert_eq!(q.admit(quad(1), 0), Admit::Admitted);
        assert_eq!(q.admit(quad(1), 1), Admit::Admitted);
        assert_eq!(q.len(), 1);
    }

    #[test]
    fn flags_render_in_canonical_order() {
        assert_eq!(TcpFlags::SYN_ACK.to_string(), "SYN|ACK");
        assert_eq!(TcpFlags::default().to_string(), "-");
    }
}
