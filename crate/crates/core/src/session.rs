//! Party state (network endpoint plus pairwise PRG keys) and session
//! runners for the in-process and TCP deployments.

use std::net::SocketAddr;
use std::thread;
use std::time::Duration;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::ring::mask;
use crate::transport::{
    inproc_mesh, next, prev, CommMeter, Endpoint, Inbox, Link, MsgWriter, Outbox, PartyId,
    Phase, SessionMeter, TcpLink, N_PARTIES,
};

/// Which PRG stream a draw comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Key {
    /// K_i, shared with party i+1.
    Next,
    /// K_{i-1}, shared with party i-1.
    Prev,
    /// Private to this party.
    Local,
}

pub struct Party {
    net: Endpoint,
    next_key: ChaCha12Rng,
    prev_key: ChaCha12Rng,
    local: ChaCha12Rng,
}

fn local_rng(seed: Option<u64>, id: PartyId) -> ChaCha12Rng {
    match seed {
        Some(s) => {
            let mut h = Sha256::new();
            h.update(b"party-local");
            h.update(s.to_le_bytes());
            h.update((id as u64).to_le_bytes());
            let d = h.finalize();
            let mut seed = [0u8; 32];
            seed.copy_from_slice(&d);
            ChaCha12Rng::from_seed(seed)
        }
        None => ChaCha12Rng::from_entropy(),
    }
}

impl Party {
    /// Runs the key setup: party i samples K_i and hands it to party i+1.
    pub fn setup(id: PartyId, link: Box<dyn Link>, seed: Option<u64>) -> Result<Party> {
        let mut net = Endpoint::new(id, link);
        net.set_phase(Phase::Setup);
        let mut local = local_rng(seed, id);
        let mut k_next = [0u8; 32];
        local.fill_bytes(&mut k_next);
        let mut out = Outbox::new();
        let mut m = MsgWriter::new();
        let words: Vec<u128> = k_next
            .chunks_exact(16)
            .map(|c| u128::from_le_bytes(c.try_into().unwrap()))
            .collect();
        m.words(&words, 128);
        out.send(next(id), m).expect(prev(id));
        let mut inbox = net.exchange(out)?;
        let mut r = inbox.take(prev(id))?;
        let got = r.words(2, 128)?;
        r.finish()?;
        let mut k_prev = [0u8; 32];
        k_prev[..16].copy_from_slice(&got[0].to_le_bytes());
        k_prev[16..].copy_from_slice(&got[1].to_le_bytes());
        net.set_phase(Phase::Online);
        Ok(Party {
            net,
            next_key: ChaCha12Rng::from_seed(k_next),
            prev_key: ChaCha12Rng::from_seed(k_prev),
            local,
        })
    }

    pub fn id(&self) -> PartyId {
        self.net.id()
    }

    pub fn meter(&self) -> &CommMeter {
        self.net.meter()
    }

    pub fn phase(&self) -> Phase {
        self.net.phase()
    }

    pub fn set_phase(&mut self, phase: Phase) -> Phase {
        self.net.set_phase(phase)
    }

    /// Runs `f` with the meter attributing traffic to `phase`.
    pub fn in_phase<T>(&mut self, phase: Phase, f: impl FnOnce(&mut Party) -> T) -> T {
        let old = self.set_phase(phase);
        let out = f(self);
        self.set_phase(old);
        out
    }

    pub fn exchange(&mut self, out: Outbox) -> Result<Inbox> {
        self.net.exchange(out)
    }

    fn rng(&mut self, key: Key) -> &mut ChaCha12Rng {
        match key {
            Key::Next => &mut self.next_key,
            Key::Prev => &mut self.prev_key,
            Key::Local => &mut self.local,
        }
    }

    /// `n` uniform values of `width` bits from the given stream.
    pub fn draw(&mut self, key: Key, n: usize, width: u32) -> Vec<u128> {
        let m = mask(width);
        let rng = self.rng(key);
        if width <= 64 {
            (0..n).map(|_| rng.next_u64() as u128 & m).collect()
        } else {
            (0..n).map(|_| rng.gen::<u128>() & m).collect()
        }
    }

    /// Uniform permutation of `0..n` from the given stream.
    pub fn draw_perm(&mut self, key: Key, n: usize) -> Vec<usize> {
        let mut p: Vec<usize> = (0..n).collect();
        p.shuffle(self.rng(key));
        p
    }
}

#[derive(Clone, Debug)]
pub enum Mode {
    Inproc,
    Tcp {
        addrs: [SocketAddr; N_PARTIES],
    },
}

#[derive(Clone, Debug)]
pub struct SessionConfig {
    pub mode: Mode,
    /// Deterministic local randomness when set; OS entropy otherwise.
    pub seed: Option<u64>,
    pub timeout: Duration,
    /// Configuration digest checked during the TCP handshake.
    pub digest: [u8; 32],
}

impl SessionConfig {
    pub fn inproc(seed: u64) -> Self {
        SessionConfig {
            mode: Mode::Inproc,
            seed: Some(seed),
            timeout: Duration::from_secs(600),
            digest: [0; 32],
        }
    }
}

pub struct SessionOutput<T> {
    pub outputs: [T; N_PARTIES],
    pub meter: SessionMeter,
}

/// Runs the same program on three in-process parties.
pub fn run_session<T, F>(cfg: &SessionConfig, program: F) -> Result<SessionOutput<T>>
where
    T: Send,
    F: Fn(&mut Party) -> Result<T> + Sync,
{
    if !matches!(cfg.mode, Mode::Inproc) {
        return Err(Error::config("run_session drives in-process sessions only"));
    }
    let links = inproc_mesh(cfg.timeout);
    let program = &program;
    let results: Vec<Result<(T, CommMeter)>> = thread::scope(|s| {
        let handles: Vec<_> = links
            .into_iter()
            .enumerate()
            .map(|(id, link)| {
                let seed = cfg.seed;
                thread::Builder::new()
                    .name(format!("party-{id}"))
                    .stack_size(16 << 20)
                    .spawn_scoped(s, move || {
                        let mut p = Party::setup(id, Box::new(link), seed)?;
                        let out = program(&mut p)?;
                        Ok((out, p.meter().clone()))
                    })
                    .expect("spawn party thread")
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(Error::Setup("party thread panicked".into()))))
            .collect()
    });
    collect_results(results)
}

fn collect_results<T>(results: Vec<Result<(T, CommMeter)>>) -> Result<SessionOutput<T>> {
    if results.iter().any(|r| r.is_err()) {
        let mut errs: Vec<Error> = results.into_iter().filter_map(|r| r.err()).collect();
        let idx = errs.iter().position(|e| !e.is_secondary()).unwrap_or(0);
        return Err(errs.swap_remove(idx));
    }
    let mut outputs = Vec::with_capacity(N_PARTIES);
    let mut meters = Vec::with_capacity(N_PARTIES);
    for r in results {
        let (o, m) = r.unwrap();
        outputs.push(o);
        meters.push(m);
    }
    let mut oi = outputs.into_iter();
    let mut mi = meters.into_iter();
    Ok(SessionOutput {
        outputs: std::array::from_fn(|_| oi.next().unwrap()),
        meter: SessionMeter {
            parties: std::array::from_fn(|_| mi.next().unwrap()),
        },
    })
}

/// Runs one party of a TCP deployment in this process.
pub fn run_tcp_party<T, F>(cfg: &SessionConfig, id: PartyId, program: F) -> Result<(T, CommMeter)>
where
    F: FnOnce(&mut Party) -> Result<T>,
{
    let Mode::Tcp { addrs } = &cfg.mode else {
        return Err(Error::config("run_tcp_party needs a tcp configuration"));
    };
    let link = TcpLink::connect(id, addrs, cfg.digest, cfg.timeout)?;
    let mut p = Party::setup(id, Box::new(link), cfg.seed)?;
    let out = program(&mut p)?;
    Ok((out, p.meter().clone()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_keys_agree() {
        let out = run_session(&SessionConfig::inproc(3), |p| {
            Ok((p.draw(Key::Next, 4, 128), p.draw(Key::Prev, 4, 128), p.draw_perm(Key::Next, 10)))
        })
        .unwrap();
        for i in 0..3 {
            let j = next(i);
            assert_eq!(out.outputs[i].0, out.outputs[j].1);
            assert_ne!(out.outputs[i].0, out.outputs[i].1);
        }
        assert_eq!(out.meter.rounds(Phase::Setup), 1);
        assert_eq!(out.meter.bits(Phase::Setup), 3 * 256);
    }

    #[test]
    fn seeded_sessions_are_reproducible() {
        let run = || {
            run_session(&SessionConfig::inproc(9), |p| Ok(p.draw(Key::Local, 2, 64)))
                .unwrap()
                .outputs
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn first_real_error_wins() {
        let r = run_session(&SessionConfig::inproc(1), |p| {
            if p.id() == 1 {
                return Err(Error::Preprocessing("boom".into()));
            }
            let mut out = Outbox::new();
            out.expect(1);
            p.exchange(out)?;
            Ok(())
        });
        assert!(matches!(r, Err(Error::Preprocessing(_))));
    }
}
