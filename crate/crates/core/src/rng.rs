//! Seed derivation and the two random variates the estimators need.
//!
//! Every unit of parallel work (an imputation, an outer posterior draw, a
//! simulation replicate) gets its own generator seeded from
//! `derive_seed(master, path)`, so results never depend on scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Gamma};

pub type StreamRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a master seed with a path of indices into a new seed.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(master), |acc, &i| {
        splitmix64(acc ^ splitmix64(i.wrapping_add(0x5851_F42D_4C95_7F2D)))
    })
}

pub fn stream_rng(master: u64, path: &[u64]) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(master, path))
}

/// Draws from Dirichlet(alpha) by normalising independent Gamma(alpha_i, 1).
///
/// Panics if any shape is not strictly positive.
pub fn dirichlet<const K: usize, R: Rng + ?Sized>(alpha: [f64; K], rng: &mut R) -> [f64; K] {
    let gammas: [Gamma<f64>; K] =
        alpha.map(|a| Gamma::new(a, 1.0).expect("dirichlet shape must be positive and finite"));
    loop {
        let mut x = [0.0; K];
        let mut sum = 0.0;
        for (xi, g) in x.iter_mut().zip(&gammas) {
            *xi = g.sample(rng);
            sum += *xi;
        }
        // all-zero only happens through underflow with tiny shapes
        if sum > 0.0 {
            return x.map(|v| v / sum);
        }
    }
}

pub fn binomial<R: Rng + ?Sized>(n: u64, p: f64, rng: &mut R) -> u64 {
    let p = p.clamp(0.0, 1.0);
    Binomial::new(n, p)
        .expect("probability clamped to [0,1]")
        .sample(rng)
}
