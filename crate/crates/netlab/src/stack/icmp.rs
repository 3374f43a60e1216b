//! ICMP echo: the request/reply pair used by ping, smurf amplification and
//! the broadcast-reply mitigation.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IcmpKind {
    EchoRequest,
    EchoReply,
}

impl IcmpKind {
    /// ICMP type field value: 8 for requests, 0 for replies.
    pub fn type_field(self) -> u8 {
        match self {
            IcmpKind::EchoRequest => 8,
            IcmpKind::EchoReply => 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IcmpMessage {
    pub kind: IcmpKind,
    pub id: u32,
}

impl IcmpMessage {
    pub fn request(id: u32) -> Self {
        IcmpMessage { kind: IcmpKind::EchoRequest, id }
    }

    pub fn reply_to(&self) -> Self {
        IcmpMessage { kind: IcmpKind::EchoReply, id: self.id }
    }

    pub fn render(&self) -> String {
        let name = match self.kind {
            IcmpKind::EchoRequest => "echo-request",
            IcmpKind::EchoReply => "echo-reply",
        };
        format!("icmp type={} {} id={}", self.kind.type_field(), name, self.id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reply_keeps_id_and_flips_type() {
        let req = IcmpMessage::request(7);
        let rep = req.reply_to();
        assert_eq!(rep.id, 7);
        assert_eq!(req.kind.type_field(), 8);
        assert_eq!(rep.kind.type_field(), 0);
    }
}
