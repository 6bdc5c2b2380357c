//! SplitMix64: a small counter-based generator with explicit stream splitting.
//!
//! The state advances along a Weyl sequence (adding a fixed odd constant) and
//! each output is a finalizing hash of the state, so draw `i` from seed `s` is
//! a pure function of `(s, i)`. That makes reproducibility trivial to reason
//! about: ensemble member `k` always runs on the stream seeded with
//! `base_seed ^ k`, no matter how trajectories are scheduled across threads.
//!
//! Statistical quality is more than adequate for Monte-Carlo sampling here
//! (it is the generator used to seed the xoshiro family), and the whole
//! generator is ~10 lines, which keeps simulation results portable: the
//! reference outputs below pin the implementation bit-for-bit.

/// Counter-based 64-bit generator.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    /// Stream for one member of an ensemble: `base_seed ^ index`.
    ///
    /// Distinct indices give distinct seeds, and the finalizer decorrelates
    /// seeds that differ in a single bit.
    pub fn stream(base_seed: u64, index: u64) -> Self {
        SplitMix64::new(base_seed ^ index)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform draw in `[0, 1)` with 53-bit resolution.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Exponential holding time with the given rate (> 0).
    ///
    /// Uses `-ln(1 - U)/rate`; `1 - U` lies in `(0, 1]`, so the log is finite.
    pub fn next_exp(&mut self, rate: f64) -> f64 {
        debug_assert!(rate > 0.0);
        -(1.0 - self.next_f64()).ln() / rate
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Reference outputs for the published SplitMix64 finalizer. If these
    /// change, every seeded simulation result in the repository changes.
    #[test]
    fn reference_vectors() {
        let mut g = SplitMix64::new(0);
        assert_eq!(g.next_u64(), 0xE220_A839_7B1D_CDAF);
        assert_eq!(g.next_u64(), 0x6E78_9E6A_A1B9_65F4);
        assert_eq!(g.next_u64(), 0x06C4_5D18_8009_454F);
        assert_eq!(g.next_u64(), 0xF88B_B8A8_724C_81EC);

        let mut g = SplitMix64::new(42);
        assert_eq!(g.next_u64(), 0xBDD7_3226_2FEB_6E95);
        assert_eq!(g.next_u64(), 0x28EF_E333_B266_F103);
    }

    #[test]
    fn same_seed_same_sequence() {
        let mut a = SplitMix64::new(0xDEAD_BEEF);
        let mut b = SplitMix64::new(0xDEAD_BEEF);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn uniform_draws_are_in_unit_interval() {
        let mut g = SplitMix64::new(7);
        for _ in 0..10_000 {
            let u = g.next_f64();
            assert!((0.0..1.0).contains(&u));
        }
    }

    #[test]
    fn exponential_mean_matches_rate() {
        let mut g = SplitMix64::new(123);
        let rate = 4.0;
        let n = 100_000;
        let mean: f64 = (0..n).map(|_| g.next_exp(rate)).sum::<f64>() / n as f64;
        // se = 1/(rate*sqrt(n)) ~ 7.9e-4; allow 4 se.
        assert!((mean - 1.0 / rate).abs() < 3.2e-3, "mean = {mean}");
    }

    #[test]
    fn streams_differ_by_index() {
        let a = SplitMix64::stream(99, 0).next_u64();
        let b = SplitMix64::stream(99, 1).next_u64();
        assert_ne!(a, b);
    }
}
