//! Point-to-point links between the three parties, message framing and
//! communication metering.
//!
//! Every communication step of a protocol is one call to
//! [`Endpoint::exchange`]: all outgoing messages are sent first, then the
//! expected incoming ones are awaited. Each call counts as one round.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ring::{self, RingConfig};

pub type PartyId = usize;

pub const N_PARTIES: usize = 3;

#[inline]
pub fn next(id: PartyId) -> PartyId {
    (id + 1) % N_PARTIES
}

#[inline]
pub fn prev(id: PartyId) -> PartyId {
    (id + N_PARTIES - 1) % N_PARTIES
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    Setup,
    Input,
    Offline,
    Online,
}

impl Phase {
    pub const ALL: [Phase; 4] = [Phase::Setup, Phase::Input, Phase::Offline, Phase::Online];

    fn index(self) -> usize {
        match self {
            Phase::Setup => 0,
            Phase::Input => 1,
            Phase::Offline => 2,
            Phase::Online => 3,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseStats {
    /// Exact protocol bits sent to each peer.
    pub bits_sent: [u64; N_PARTIES],
    /// Payload bytes sent to each peer, framing excluded.
    pub bytes_sent: [u64; N_PARTIES],
    pub messages: u64,
    pub rounds: u64,
}

impl PhaseStats {
    pub fn bits(&self) -> u64 {
        self.bits_sent.iter().sum()
    }

    pub fn bytes(&self) -> u64 {
        self.bytes_sent.iter().sum()
    }

    fn absorb(&mut self, other: &PhaseStats) {
        for i in 0..N_PARTIES {
            self.bits_sent[i] += other.bits_sent[i];
            self.bytes_sent[i] += other.bytes_sent[i];
        }
        self.messages += other.messages;
        self.rounds += other.rounds;
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommMeter {
    phases: [PhaseStats; 4],
}

impl CommMeter {
    pub fn phase(&self, phase: Phase) -> &PhaseStats {
        &self.phases[phase.index()]
    }

    pub fn total(&self) -> PhaseStats {
        let mut t = PhaseStats::default();
        for p in &self.phases {
            t.absorb(p);
        }
        t
    }

    /// Difference `self - earlier`, for metering a single protocol call.
    pub fn since(&self, earlier: &CommMeter) -> CommMeter {
        let mut out = self.clone();
        for (o, e) in out.phases.iter_mut().zip(&earlier.phases) {
            for i in 0..N_PARTIES {
                o.bits_sent[i] -= e.bits_sent[i];
                o.bytes_sent[i] -= e.bytes_sent[i];
            }
            o.messages -= e.messages;
            o.rounds -= e.rounds;
        }
        out
    }

    fn phase_mut(&mut self, phase: Phase) -> &mut PhaseStats {
        &mut self.phases[phase.index()]
    }
}

/// Session-level view over the three parties' meters.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionMeter {
    pub parties: [CommMeter; N_PARTIES],
}

impl SessionMeter {
    /// Bits sent by all parties in `phase`.
    pub fn bits(&self, phase: Phase) -> u64 {
        self.parties.iter().map(|m| m.phase(phase).bits()).sum()
    }

    pub fn bytes(&self, phase: Phase) -> u64 {
        self.parties.iter().map(|m| m.phase(phase).bytes()).sum()
    }

    /// Rounds of `phase`, the maximum over parties.
    pub fn rounds(&self, phase: Phase) -> u64 {
        self.parties.iter().map(|m| m.phase(phase).rounds).max().unwrap_or(0)
    }

    pub fn total_bits(&self) -> u64 {
        self.parties.iter().map(|m| m.total().bits()).sum()
    }

    pub fn total_rounds(&self) -> u64 {
        self.parties.iter().map(|m| m.total().rounds).max().unwrap_or(0)
    }

    pub fn since(&self, earlier: &SessionMeter) -> SessionMeter {
        SessionMeter {
            parties: std::array::from_fn(|i| self.parties[i].since(&earlier.parties[i])),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Envelope {
    pub from: PartyId,
    pub to: PartyId,
    pub seq: u64,
    pub payload: Vec<u8>,
}

pub const ENVELOPE_HEADER: usize = 1 + 1 + 8 + 4;

impl Envelope {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(ENVELOPE_HEADER + self.payload.len());
        out.push(self.from as u8);
        out.push(self.to as u8);
        out.extend_from_slice(&self.seq.to_le_bytes());
        out.extend_from_slice(&(self.payload.len() as u32).to_le_bytes());
        out.extend_from_slice(&self.payload);
        out
    }

    pub fn decode_header(h: &[u8; ENVELOPE_HEADER]) -> (PartyId, PartyId, u64, usize) {
        let seq = u64::from_le_bytes(h[2..10].try_into().unwrap());
        let len = u32::from_le_bytes(h[10..14].try_into().unwrap()) as usize;
        (h[0] as PartyId, h[1] as PartyId, seq, len)
    }

    pub fn decode(bytes: &[u8]) -> Result<Envelope> {
        if bytes.len() < ENVELOPE_HEADER {
            return Err(Error::Decode("truncated envelope header".into()));
        }
        let (from, to, seq, len) = Self::decode_header(bytes[..ENVELOPE_HEADER].try_into().unwrap());
        if bytes.len() != ENVELOPE_HEADER + len {
            return Err(Error::Decode(format!(
                "envelope length {len} disagrees with {} payload bytes",
                bytes.len() - ENVELOPE_HEADER
            )));
        }
        Ok(Envelope {
            from,
            to,
            seq,
            payload: bytes[ENVELOPE_HEADER..].to_vec(),
        })
    }
}

/// Raw delivery of envelopes to and from the two peers.
pub trait Link: Send {
    fn send(&mut self, env: Envelope) -> Result<()>;
    fn recv(&mut self, from: PartyId) -> Result<Envelope>;
}

/// In-process link backed by channels.
pub struct InprocLink {
    id: PartyId,
    tx: HashMap<PartyId, Sender<Envelope>>,
    rx: HashMap<PartyId, Receiver<Envelope>>,
    timeout: Duration,
}

/// Fully connected channel mesh for three parties.
pub fn inproc_mesh(timeout: Duration) -> [InprocLink; N_PARTIES] {
    let mut links: Vec<InprocLink> = (0..N_PARTIES)
        .map(|id| InprocLink {
            id,
            tx: HashMap::new(),
            rx: HashMap::new(),
            timeout,
        })
        .collect();
    for a in 0..N_PARTIES {
        for b in 0..N_PARTIES {
            if a != b {
                let (tx, rx) = mpsc::channel();
                links[a].tx.insert(b, tx);
                links[b].rx.insert(a, rx);
            }
        }
    }
    let mut it = links.into_iter();
    std::array::from_fn(|_| it.next().unwrap())
}

impl Link for InprocLink {
    fn send(&mut self, env: Envelope) -> Result<()> {
        let to = env.to;
        self.tx
            .get(&to)
            .ok_or_else(|| Error::config(format!("party {} has no link to {to}", self.id)))?
            .send(env)
            .map_err(|_| Error::Transport {
                peer: to,
                reason: "peer hung up".into(),
            })
    }

    fn recv(&mut self, from: PartyId) -> Result<Envelope> {
        let rx = self
            .rx
            .get(&from)
            .ok_or_else(|| Error::config(format!("party {} has no link from {from}", self.id)))?;
        rx.recv_timeout(self.timeout).map_err(|e| Error::Transport {
            peer: from,
            reason: match e {
                RecvTimeoutError::Timeout => "timed out".into(),
                RecvTimeoutError::Disconnected => "peer hung up".into(),
            },
        })
    }
}

/// TCP link. One reader thread per peer forwards decoded envelopes into a
/// channel so that sends never block on an unread socket.
pub struct TcpLink {
    id: PartyId,
    writers: HashMap<PartyId, TcpStream>,
    rx: HashMap<PartyId, Receiver<Result<Envelope>>>,
    timeout: Duration,
}

const HANDSHAKE_MAGIC: &[u8; 4] = b"RSST";

fn handshake(stream: &mut TcpStream, id: PartyId, digest: &[u8; 32]) -> Result<PartyId> {
    let mut hello = Vec::with_capacity(37);
    hello.extend_from_slice(HANDSHAKE_MAGIC);
    hello.push(id as u8);
    hello.extend_from_slice(digest);
    stream.write_all(&hello)?;
    let mut peer = [0u8; 37];
    stream.read_exact(&mut peer)?;
    if &peer[..4] != HANDSHAKE_MAGIC {
        return Err(Error::Setup("bad handshake magic".into()));
    }
    let pid = peer[4] as PartyId;
    if pid >= N_PARTIES || pid == id {
        return Err(Error::Setup(format!("peer announced invalid id {pid}")));
    }
    if &peer[5..] != digest {
        return Err(Error::Setup(format!(
            "party {pid} runs with a different session configuration"
        )));
    }
    Ok(pid)
}

fn spawn_reader(mut stream: TcpStream, peer: PartyId) -> Receiver<Result<Envelope>> {
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || loop {
        let mut h = [0u8; ENVELOPE_HEADER];
        if let Err(e) = stream.read_exact(&mut h) {
            let _ = tx.send(Err(Error::Transport {
                peer,
                reason: e.to_string(),
            }));
            return;
        }
        let (from, to, seq, len) = Envelope::decode_header(&h);
        let mut payload = vec![0u8; len];
        if let Err(e) = stream.read_exact(&mut payload) {
            let _ = tx.send(Err(Error::Transport {
                peer,
                reason: e.to_string(),
            }));
            return;
        }
        if tx.send(Ok(Envelope { from, to, seq, payload })).is_err() {
            return;
        }
    });
    rx
}

impl TcpLink {
    /// Party `id` listens on `addrs[id]`, accepts the higher ids and dials
    /// the lower ones.
    pub fn connect(
        id: PartyId,
        addrs: &[SocketAddr; N_PARTIES],
        digest: [u8; 32],
        timeout: Duration,
    ) -> Result<TcpLink> {
        if id >= N_PARTIES {
            return Err(Error::config(format!("party id {id} out of range")));
        }
        let mut streams: HashMap<PartyId, TcpStream> = HashMap::new();
        let listener = if id + 1 < N_PARTIES {
            Some(TcpListener::bind(addrs[id])?)
        } else {
            None
        };
        for (peer, addr) in addrs.iter().enumerate().take(id) {
            let deadline = std::time::Instant::now() + timeout;
            let mut stream = loop {
                match TcpStream::connect(addr) {
                    Ok(s) => break s,
                    Err(e) if std::time::Instant::now() < deadline => {
                        let _ = e;
                        thread::sleep(Duration::from_millis(50));
                    }
                    Err(e) => {
                        return Err(Error::Transport {
                            peer,
                            reason: format!("connect to {addr}: {e}"),
                        })
                    }
                }
            };
            stream.set_nodelay(true)?;
            let got = handshake(&mut stream, id, &digest)?;
            if got != peer {
                return Err(Error::Setup(format!("expected party {peer}, got {got}")));
            }
            streams.insert(peer, stream);
        }
        if let Some(listener) = listener {
            while streams.len() < N_PARTIES - 1 {
                let (mut stream, _) = listener.accept()?;
                stream.set_nodelay(true)?;
                let peer = handshake(&mut stream, id, &digest)?;
                if peer < id || streams.contains_key(&peer) {
                    return Err(Error::Setup(format!("unexpected connection from party {peer}")));
                }
                streams.insert(peer, stream);
            }
        }
        let mut writers = HashMap::new();
        let mut rx = HashMap::new();
        for (peer, stream) in streams {
            rx.insert(peer, spawn_reader(stream.try_clone()?, peer));
            writers.insert(peer, stream);
        }
        Ok(TcpLink {
            id,
            writers,
            rx,
            timeout,
        })
    }
}

impl Link for TcpLink {
    fn send(&mut self, env: Envelope) -> Result<()> {
        let to = env.to;
        let w = self
            .writers
            .get_mut(&to)
            .ok_or_else(|| Error::config(format!("party {} has no link to {to}", self.id)))?;
        w.write_all(&env.encode()).map_err(|e| Error::Transport {
            peer: to,
            reason: e.to_string(),
        })
    }

    fn recv(&mut self, from: PartyId) -> Result<Envelope> {
        let rx = self
            .rx
            .get(&from)
            .ok_or_else(|| Error::config(format!("party {} has no link from {from}", self.id)))?;
        match rx.recv_timeout(self.timeout) {
            Ok(r) => r,
            Err(RecvTimeoutError::Timeout) => Err(Error::Transport {
                peer: from,
                reason: "timed out".into(),
            }),
            Err(RecvTimeoutError::Disconnected) => Err(Error::Transport {
                peer: from,
                reason: "reader stopped".into(),
            }),
        }
    }
}

/// Outgoing message with an exact bit count.
#[derive(Clone, Debug, Default)]
pub struct MsgWriter {
    buf: Vec<u8>,
    bits: u64,
}

impl MsgWriter {
    pub fn new() -> Self {
        Self::default()
    }

    /// Ring elements, `ceil(w/8)` bytes each, `w` bits each.
    pub fn ring(&mut self, values: &[u128], ring: RingConfig) -> &mut Self {
        ring::write_elements(&mut self.buf, values, ring);
        self.bits += values.len() as u64 * ring.width() as u64;
        self
    }

    /// Words of `width` bits. Single bits are packed eight to a byte.
    pub fn words(&mut self, values: &[u128], width: u32) -> &mut Self {
        if width == 1 {
            let mut byte = 0u8;
            for (i, v) in values.iter().enumerate() {
                byte |= ((v & 1) as u8) << (i % 8);
                if i % 8 == 7 {
                    self.buf.push(byte);
                    byte = 0;
                }
            }
            if !values.len().is_multiple_of(8) {
                self.buf.push(byte);
            }
            self.bits += values.len() as u64;
            self
        } else {
            self.ring(values, RingConfig::integer(width).expect("word width"))
        }
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }
}

/// Incoming message, consumed in the order it was written.
#[derive(Debug)]
pub struct MsgReader {
    from: PartyId,
    buf: Vec<u8>,
    pos: usize,
}

impl MsgReader {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Decode(format!(
                "message from party {} too short: need {} more bytes, have {}",
                self.from,
                n,
                self.buf.len() - self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn ring(&mut self, n: usize, ring: RingConfig) -> Result<Vec<u128>> {
        let bytes = self.take(n * ring.byte_len())?;
        ring::read_elements(bytes, n, ring)
    }

    pub fn words(&mut self, n: usize, width: u32) -> Result<Vec<u128>> {
        if width == 1 {
            let bytes = self.take(n.div_ceil(8))?;
            Ok((0..n).map(|i| ((bytes[i / 8] >> (i % 8)) & 1) as u128).collect())
        } else {
            self.ring(n, RingConfig::integer(width)?)
        }
    }

    /// Fails if unread bytes remain.
    pub fn finish(self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::Decode(format!(
                "{} trailing bytes in message from party {}",
                self.buf.len() - self.pos,
                self.from
            )));
        }
        Ok(())
    }
}

/// A party's view of the network: link, sequence numbers and meter.
pub struct Endpoint {
    id: PartyId,
    link: Box<dyn Link>,
    seq_out: [u64; N_PARTIES],
    seq_in: [u64; N_PARTIES],
    meter: CommMeter,
    phase: Phase,
}

/// Messages of one communication step.
#[derive(Default)]
pub struct Outbox {
    msgs: Vec<(PartyId, MsgWriter)>,
    expect: Vec<PartyId>,
}

impl Outbox {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn send(&mut self, to: PartyId, msg: MsgWriter) -> &mut Self {
        self.msgs.push((to, msg));
        self
    }

    pub fn expect(&mut self, from: PartyId) -> &mut Self {
        self.expect.push(from);
        self
    }
}

pub struct Inbox {
    msgs: Vec<Option<MsgReader>>,
}

impl Inbox {
    pub fn take(&mut self, from: PartyId) -> Result<MsgReader> {
        self.msgs
            .get_mut(from)
            .and_then(|m| m.take())
            .ok_or_else(|| Error::config(format!("no message expected from party {from}")))
    }
}

impl Endpoint {
    pub fn new(id: PartyId, link: Box<dyn Link>) -> Self {
        Endpoint {
            id,
            link,
            seq_out: [0; N_PARTIES],
            seq_in: [0; N_PARTIES],
            meter: CommMeter::default(),
            phase: Phase::Setup,
        }
    }

    pub fn id(&self) -> PartyId {
        self.id
    }

    pub fn meter(&self) -> &CommMeter {
        &self.meter
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn set_phase(&mut self, phase: Phase) -> Phase {
        std::mem::replace(&mut self.phase, phase)
    }

    /// One communication round: send everything, then receive from every
    /// expected peer.
    pub fn exchange(&mut self, out: Outbox) -> Result<Inbox> {
        let phase = self.phase;
        for (to, msg) in out.msgs {
            if to == self.id || to >= N_PARTIES {
                return Err(Error::config(format!("party {} cannot send to {to}", self.id)));
            }
            let stats = self.meter.phase_mut(phase);
            stats.bits_sent[to] += msg.bits;
            stats.bytes_sent[to] += msg.buf.len() as u64;
            stats.messages += 1;
            let env = Envelope {
                from: self.id,
                to,
                seq: self.seq_out[to],
                payload: msg.buf,
            };
            self.seq_out[to] += 1;
            self.link.send(env)?;
        }
        self.meter.phase_mut(phase).rounds += 1;
        let mut msgs: Vec<Option<MsgReader>> = (0..N_PARTIES).map(|_| None).collect();
        for from in out.expect {
            let env = self.link.recv(from)?;
            if env.from != from || env.to != self.id {
                return Err(Error::Decode(format!(
                    "misrouted envelope {}->{} at party {}",
                    env.from, env.to, self.id
                )));
            }
            if env.seq != self.seq_in[from] {
                return Err(Error::Desync {
                    peer: from,
                    expected: self.seq_in[from],
                    got: env.seq,
                });
            }
            self.seq_in[from] += 1;
            msgs[from] = Some(MsgReader {
                from,
                buf: env.payload,
                pos: 0,
            });
        }
        Ok(Inbox { msgs })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn envelope_roundtrip() {
        let e = Envelope {
            from: 2,
            to: 0,
            seq: 77,
            payload: vec![1, 2, 3],
        };
        let bytes = e.encode();
        assert_eq!(bytes.len(), ENVELOPE_HEADER + 3);
        assert_eq!(Envelope::decode(&bytes).unwrap(), e);
        assert!(Envelope::decode(&bytes[..bytes.len() - 1]).is_err());
    }

    #[test]
    fn packed_bits_and_words() {
        let mut w = MsgWriter::new();
        w.words(&[1, 0, 1, 1, 0, 0, 0, 0, 1], 1);
        w.words(&[0x1ff], 9);
        assert_eq!(w.bits(), 18);
        let mut r = MsgReader {
            from: 0,
            buf: w.buf,
            pos: 0,
        };
        assert_eq!(r.words(9, 1).unwrap(), vec![1, 0, 1, 1, 0, 0, 0, 0, 1]);
        assert_eq!(r.words(1, 9).unwrap(), vec![0x1ff]);
        r.finish().unwrap();
    }

    #[test]
    fn sequence_numbers_detect_desync() {
        let [a, b, _c] = inproc_mesh(Duration::from_secs(5));
        let mut a = Endpoint::new(0, Box::new(a));
        let mut b_link = b;
        let mut out = Outbox::new();
        out.send(1, MsgWriter::new());
        a.exchange(out).unwrap();
        let env = b_link.recv(0).unwrap();
        assert_eq!(env.seq, 0);
        let mut b = Endpoint::new(1, Box::new(b_link));
        b.seq_in[0] = 5;
        let mut out = Outbox::new();
        out.send(1, MsgWriter::new());
        a.exchange(out).unwrap();
        let mut out = Outbox::new();
        out.expect(0);
        assert!(matches!(b.exchange(out), Err(Error::Desync { .. })));
    }

    #[test]
    fn meter_counts_rounds_and_bits() {
        let [a, b, _c] = inproc_mesh(Duration::from_secs(5));
        let mut a = Endpoint::new(0, Box::new(a));
        let mut b = Endpoint::new(1, Box::new(b));
        a.set_phase(Phase::Online);
        let mut m = MsgWriter::new();
        m.ring(&[5, 6], RingConfig::integer(128).unwrap());
        m.words(&[1], 1);
        let mut out = Outbox::new();
        out.send(1, m);
        a.exchange(out).unwrap();
        let mut out = Outbox::new();
        out.expect(0);
        let mut inbox = b.exchange(out).unwrap();
        let mut r = inbox.take(0).unwrap();
        assert_eq!(r.ring(2, RingConfig::integer(128).unwrap()).unwrap(), vec![5, 6]);
        assert_eq!(r.words(1, 1).unwrap(), vec![1]);
        r.finish().unwrap();
        let s = a.meter().phase(Phase::Online);
        assert_eq!(s.bits_sent[1], 257);
        assert_eq!(s.bytes_sent[1], 33);
        assert_eq!(s.rounds, 1);
        assert_eq!(b.meter().phase(Phase::Setup).rounds, 1);
    }
}
