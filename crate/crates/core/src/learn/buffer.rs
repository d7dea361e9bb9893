//! Fixed-capacity transition storage with uniform sampling.

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum BufferError {
    #[error("cannot sample from an empty {0} buffer")]
    EmptyBuffer(&'static str),
    #[error("state has dimension {got}, buffer expects {expected}")]
    StateDim { expected: usize, got: usize },
}

/// Ring buffer of `(s, a, r, s', done)`; once full, the oldest entry is
/// overwritten first. Storage grows lazily up to the capacity.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    state_dim: usize,
    capacity: usize,
    next: usize,
    len: usize,
    states: Vec<f64>,
    next_states: Vec<f64>,
    actions: Vec<f64>,
    rewards: Vec<f64>,
    dones: Vec<f64>,
}

/// Minibatch in row-major layout.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Batch {
    pub state_dim: usize,
    pub states: Vec<f64>,
    pub actions: Vec<f64>,
    pub rewards: Vec<f64>,
    pub next_states: Vec<f64>,
    pub dones: Vec<f64>,
    /// Number of rows drawn from the demonstration buffer (they come first).
    pub n_demo: usize,
}

impl Batch {
    pub fn new(state_dim: usize) -> Self {
        Self { state_dim, ..Default::default() }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn push(&mut self, s: &[f64], a: f64, r: f64, s_next: &[f64], done: bool) {
        debug_assert_eq!(s.len(), self.state_dim);
        self.states.extend_from_slice(s);
        self.actions.push(a);
        self.rewards.push(r);
        self.next_states.extend_from_slice(s_next);
        self.dones.push(if done { 1.0 } else { 0.0 });
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.state_dim..(i + 1) * self.state_dim]
    }
}

impl ReplayBuffer {
    pub fn new(state_dim: usize, capacity: usize) -> Self {
        assert!(capacity > 0, "capacity must be positive");
        Self {
            state_dim,
            capacity,
            next: 0,
            len: 0,
            states: Vec::new(),
            next_states: Vec::new(),
            actions: Vec::new(),
            rewards: Vec::new(),
            dones: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn push(&mut self, s: &[f64], a: f64, r: f64, s_next: &[f64], done: bool) -> Result<(), BufferError> {
        let d = self.state_dim;
        for x in [s, s_next] {
            if x.len() != d {
                return Err(BufferError::StateDim { expected: d, got: x.len() });
            }
        }
        let done = if done { 1.0 } else { 0.0 };
        if self.len < self.capacity {
            self.states.extend_from_slice(s);
            self.next_states.extend_from_slice(s_next);
            self.actions.push(a);
            self.rewards.push(r);
            self.dones.push(done);
            self.len += 1;
        } else {
            let i = self.next;
            self.states[i * d..(i + 1) * d].copy_from_slice(s);
            self.next_states[i * d..(i + 1) * d].copy_from_slice(s_next);
            self.actions[i] = a;
            self.rewards[i] = r;
            self.dones[i] = done;
        }
        self.next = (self.next + 1) % self.capacity;
        Ok(())
    }

    /// Reward of the stored entry at slot `i`.
    pub fn reward_at(&self, i: usize) -> f64 {
        self.rewards[i]
    }

    pub fn action_at(&self, i: usize) -> f64 {
        self.actions[i]
    }

    fn copy_into(&self, i: usize, out: &mut Batch) {
        let d = self.state_dim;
        out.states.extend_from_slice(&self.states[i * d..(i + 1) * d]);
        out.next_states.extend_from_slice(&self.next_states[i * d..(i + 1) * d]);
        out.actions.push(self.actions[i]);
        out.rewards.push(self.rewards[i]);
        out.dones.push(self.dones[i]);
    }

    /// Append `n` uniformly drawn entries (with replacement) to `out`.
    pub fn sample_into<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        n: usize,
        out: &mut Batch,
        name: &'static str,
    ) -> Result<(), BufferError> {
        if n == 0 {
            return Ok(());
        }
        if self.len == 0 {
            return Err(BufferError::EmptyBuffer(name));
        }
        for _ in 0..n {
            let i = rng.gen_range(0..self.len);
            self.copy_into(i, out);
        }
        Ok(())
    }

    /// Slot indices drawn uniformly; exposed for distribution tests.
    pub fn sample_indices<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<usize> {
        (0..n).map(|_| rng.gen_range(0..self.len)).collect()
    }
}

/// Number of demonstration rows in a batch of `batch` at demo-use ratio `dur`.
pub fn demo_count(batch: usize, dur: f64) -> usize {
    (batch as f64 * dur.clamp(0.0, 1.0)).round() as usize
}

/// Minibatch with `round(batch * dur)` rows from `demo` and the rest from
/// `agent`.
pub fn sample_mixed_batch<R: Rng + ?Sized>(
    rng: &mut R,
    agent: &ReplayBuffer,
    demo: &ReplayBuffer,
    batch: usize,
    dur: f64,
) -> Result<Batch, BufferError> {
    let n_demo = demo_count(batch, dur);
    let mut out = Batch::new(agent.state_dim());
    demo.sample_into(rng, n_demo, &mut out, "demo")?;
    agent.sample_into(rng, batch - n_demo, &mut out, "agent")?;
    out.n_demo = n_demo;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn filled(n: usize, cap: usize, tag: f64) -> ReplayBuffer {
        let mut b = ReplayBuffer::new(2, cap);
        for i in 0..n {
            b.push(&[i as f64, tag], tag, i as f64, &[0.0, 0.0], false).unwrap();
        }
        b
    }

    #[test]
    fn evicts_oldest_first() {
        let b = filled(7, 5, 0.0);
        assert_eq!(b.len(), 5);
        // entries 0 and 1 were overwritten by 5 and 6
        let mut rewards: Vec<f64> = (0..5).map(|i| b.reward_at(i)).collect();
        rewards.sort_by(f64::total_cmp);
        assert_eq!(rewards, vec![2.0, 3.0, 4.0, 5.0, 6.0]);
    }

    #[test]
    fn mixed_batch_composition() {
        let agent = filled(100, 100, 0.0);
        let demo = filled(100, 100, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for (dur, n_demo) in [(0.1, 3), (0.3, 10), (0.0, 0), (1.0, 32)] {
            let b = sample_mixed_batch(&mut rng, &agent, &demo, 32, dur).unwrap();
            assert_eq!(b.len(), 32);
            assert_eq!(b.n_demo, n_demo);
            assert_eq!(b.actions.iter().filter(|a| **a == 1.0).count(), n_demo);
        }
    }

    #[test]
    fn empty_buffers() {
        let agent = filled(10, 10, 0.0);
        let demo = ReplayBuffer::new(2, 10);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(
            sample_mixed_batch(&mut rng, &agent, &demo, 32, 0.1),
            Err(BufferError::EmptyBuffer("demo"))
        );
        assert!(sample_mixed_batch(&mut rng, &agent, &demo, 32, 0.0).is_ok());
    }

    #[test]
    fn uniform_sampling_chi_square() {
        let b = filled(50, 50, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 100_000;
        let mut counts = [0f64; 50];
        for i in b.sample_indices(&mut rng, n) {
            counts[i] += 1.0;
        }
        let e = n as f64 / 50.0;
        let chi2: f64 = counts.iter().map(|c| (c - e).powi(2) / e).sum();
        // 99th percentile of chi-square with 49 degrees of freedom
        assert!(chi2 < 74.92, "chi2 {chi2}");
    }

    #[test]
    fn rejects_wrong_state_dim() {
        let mut b = ReplayBuffer::new(3, 4);
        assert_eq!(b.push(&[0.0], 0.0, 0.0, &[0.0; 3], false), Err(BufferError::StateDim { expected: 3, got: 1 }));
    }
}
