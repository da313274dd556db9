//! Fixed-capacity ring buffer of transitions with uniform sampling, used for
//! both the interaction buffer and the demonstration buffer.

use std::io::{Read, Write};

use rand::Rng;

use crate::env::{Action, EnvState, Transition, COLLISION_REWARD};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct TransitionBuffer {
    items: Vec<Transition>,
    capacity: usize,
    /// Next slot to overwrite once full.
    head: usize,
    /// Total pushes over the buffer's lifetime.
    inserted: u64,
}

impl TransitionBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "buffer capacity must be positive");
        TransitionBuffer {
            items: Vec::with_capacity(capacity.min(1 << 16)),
            capacity,
            head: 0,
            inserted: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    /// Appends, evicting the oldest entry when full.
    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.head] = t;
            self.head = (self.head + 1) % self.capacity;
        }
        self.inserted += 1;
    }

    pub fn extend<I: IntoIterator<Item = Transition>>(&mut self, it: I) {
        for t in it {
            self.push(t);
        }
    }

    /// Entries from oldest to newest.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        let (newer, older) = self.items.split_at(self.head);
        older.iter().chain(newer.iter())
    }

    pub fn get(&self, i: usize) -> Option<&Transition> {
        self.items.get(i)
    }

    /// `n` indices drawn uniformly with replacement; empty when the buffer is.
    pub fn sample_indices<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<usize> {
        if self.items.is_empty() {
            return Vec::new();
        }
        (0..n).map(|_| rng.random_range(0..self.items.len())).collect()
    }

    /// A batch of at most `min(n, len)` transitions drawn uniformly with
    /// replacement.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<&Transition> {
        let n = n.min(self.items.len());
        self.sample_indices(n, rng).into_iter().map(|i| &self.items[i]).collect()
    }

    /// CSV dump with columns `s..., a..., s_next..., r, done`.
    pub fn write_csv<W: Write>(&self, out: W, n_joints: usize) -> Result<()> {
        write_transitions_csv(out, n_joints, self.iter())
    }

    /// Loads a CSV written by [`TransitionBuffer::write_csv`]. The buffer
    /// capacity grows to fit when `capacity` is smaller than the file.
    pub fn read_csv<R: Read>(input: R, n_joints: usize, capacity: usize) -> Result<Self> {
        let rows = read_transitions_csv(input, n_joints)?;
        let mut buf = TransitionBuffer::new(capacity.max(rows.len()).max(1));
        buf.extend(rows);
        Ok(buf)
    }
}

pub fn transition_header(n_joints: usize) -> Vec<String> {
    let sl = EnvState::feature_len(n_joints);
    let mut h: Vec<String> = (0..sl).map(|i| format!("s{i}")).collect();
    h.extend((0..n_joints).map(|i| format!("a{i}")));
    h.extend((0..sl).map(|i| format!("s_next{i}")));
    h.push("r".into());
    h.push("done".into());
    h
}

pub fn write_transitions_csv<'a, W: Write, I: IntoIterator<Item = &'a Transition>>(
    out: W,
    n_joints: usize,
    rows: I,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(transition_header(n_joints))?;
    let mut rec: Vec<String> = Vec::new();
    for t in rows {
        rec.clear();
        let mut f = Vec::new();
        t.s.write_features(&mut f);
        f.extend_from_slice(t.a.values());
        t.s_next.write_features(&mut f);
        f.push(t.r);
        // `{:?}` on f64 prints the shortest string that round-trips exactly
        rec.extend(f.iter().map(|v| format!("{v:?}")));
        rec.push(u8::from(t.done).to_string());
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::Parse(e.to_string()))?;
    Ok(())
}

pub fn read_transitions_csv<R: Read>(input: R, n_joints: usize) -> Result<Vec<Transition>> {
    let mut r = csv::Reader::from_reader(input);
    let header = transition_header(n_joints);
    let got: Vec<&str> = r.headers()?.iter().collect();
    if got != header {
        return Err(Error::Parse(format!(
            "unexpected header for {n_joints} joints: {}",
            got.join(",")
        )));
    }
    let sl = EnvState::feature_len(n_joints);
    let mut out = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let bad = |what: &str| Error::Parse(format!("row {}: {what}", line + 1));
        let vals: Vec<f64> = rec
            .iter()
            .take(header.len() - 1)
            .map(|x| x.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad("non-numeric field"))?;
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(bad("non-finite value"));
        }
        let done = match rec.get(header.len() - 1).map(str::trim) {
            Some("0") | Some("false") => false,
            Some("1") | Some("true") => true,
            _ => return Err(bad("done must be 0 or 1")),
        };
        let s = EnvState::from_features(&vals[..sl], n_joints)?;
        let a = Action::new(vals[sl..sl + n_joints].to_vec());
        let s_next = EnvState::from_features(&vals[sl + n_joints..2 * sl + n_joints], n_joints)?;
        let r = vals[2 * sl + n_joints];
        out.push(Transition {
            s,
            a,
            s_next,
            r,
            done,
            collision: r == COLLISION_REWARD,
        });
    }
    Ok(out)
}
