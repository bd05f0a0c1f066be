//! Flat binary dump of a replay buffer.
//!
//! Layout, all little-endian:
//!
//! ```text
//! magic "ERPB" | version u32 | capacity u64 | size u64 | obs_dim u32 | act_dim u32
//! size records in ring order (oldest first), each:
//!   state f64[obs_dim] | action f64[act_dim] | reward f64 | next_state f64[obs_dim]
//!   done u8 | insert_timestep u64 | td_error f64 | priority_score f64
//!   per_priority f64 | in_subset u8
//! ```

use std::io::{self, Read, Write};

use super::{ReplayBuffer, Transition};

pub const MAGIC: &[u8; 4] = b"ERPB";
pub const VERSION: u32 = 1;

/// Decoded snapshot contents.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub capacity: u64,
    pub obs_dim: u32,
    pub act_dim: u32,
    /// Transitions in ring order with their subset membership.
    pub records: Vec<(Transition, bool)>,
}

/// Size in bytes of one record.
pub fn record_len(obs_dim: usize, act_dim: usize) -> usize {
    8 * (2 * obs_dim + act_dim) + 8 + 1 + 8 + 8 + 8 + 8 + 1
}

pub fn write_snapshot<W: Write>(buffer: &ReplayBuffer, mut out: W) -> io::Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&(buffer.capacity() as u64).to_le_bytes())?;
    out.write_all(&(buffer.len() as u64).to_le_bytes())?;
    out.write_all(&(buffer.obs_dim() as u32).to_le_bytes())?;
    out.write_all(&(buffer.action_dim() as u32).to_le_bytes())?;

    let mut record = Vec::with_capacity(record_len(buffer.obs_dim(), buffer.action_dim()));
    for slot in buffer.ring_order() {
        let t = buffer.get(slot);
        record.clear();
        for v in t.state.iter().chain(&t.action) {
            record.extend_from_slice(&v.to_le_bytes());
        }
        record.extend_from_slice(&t.reward.to_le_bytes());
        for v in &t.next_state {
            record.extend_from_slice(&v.to_le_bytes());
        }
        record.push(t.done as u8);
        record.extend_from_slice(&t.insert_timestep.to_le_bytes());
        record.extend_from_slice(&t.td_error.to_le_bytes());
        record.extend_from_slice(&t.priority_score.to_le_bytes());
        record.extend_from_slice(&t.per_priority.to_le_bytes());
        record.push(buffer.in_subset(slot) as u8);
        out.write_all(&record)?;
    }
    out.flush()
}

fn invalid(msg: impl Into<String>) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg.into())
}

struct Cursor<'a>(&'a [u8]);

impl Cursor<'_> {
    fn take<const N: usize>(&mut self) -> [u8; N] {
        let (head, tail) = self.0.split_at(N);
        self.0 = tail;
        head.try_into().expect("split at N")
    }

    fn f64(&mut self) -> f64 {
        f64::from_le_bytes(self.take())
    }

    fn f64s(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.f64()).collect()
    }
}

pub fn read_snapshot<R: Read>(mut input: R) -> io::Result<Snapshot> {
    let mut header = [0u8; 32];
    input.read_exact(&mut header)?;
    if &header[..4] != MAGIC {
        return Err(invalid("not a replay buffer snapshot (bad magic)"));
    }
    let version = u32::from_le_bytes(header[4..8].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(invalid(format!("unsupported snapshot version {version}")));
    }
    let capacity = u64::from_le_bytes(header[8..16].try_into().expect("8 bytes"));
    let size = u64::from_le_bytes(header[16..24].try_into().expect("8 bytes"));
    let obs_dim = u32::from_le_bytes(header[24..28].try_into().expect("4 bytes"));
    let act_dim = u32::from_le_bytes(header[28..32].try_into().expect("4 bytes"));
    if size > capacity {
        return Err(invalid(format!("size {size} exceeds capacity {capacity}")));
    }

    let (od, ad) = (obs_dim as usize, act_dim as usize);
    let mut buf = vec![0u8; record_len(od, ad)];
    let mut records = Vec::with_capacity(size as usize);
    for _ in 0..size {
        input.read_exact(&mut buf)?;
        let mut c = Cursor(&buf);
        let state = c.f64s(od);
        let action = c.f64s(ad);
        let reward = c.f64();
        let next_state = c.f64s(od);
        let [done] = c.take::<1>();
        let insert_timestep = u64::from_le_bytes(c.take());
        let td_error = c.f64();
        let priority_score = c.f64();
        let per_priority = c.f64();
        let [in_subset] = c.take::<1>();
        records.push((
            Transition {
                state,
                action,
                reward,
                next_state,
                done: done != 0,
                insert_timestep,
                td_error,
                priority_score,
                per_priority,
            },
            in_subset != 0,
        ));
    }
    Ok(Snapshot {
        capacity,
        obs_dim,
        act_dim,
        records,
    })
}
