use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Matrix, Vector};

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Names one reproducible random stream: a ChaCha8 key derived from `seed`
/// and a stream number `stream_id`.
///
/// The descriptor is immutable; [`RngStream::rng`] hands out a fresh
/// generator positioned at the start of the stream, and
/// [`RngStream::substream`] derives child streams keyed by integers (trial,
/// location, method, ...). Two streams with the same `(seed, stream_id)`
/// produce identical draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self { seed, stream_id: 0 }
    }

    pub fn with_stream(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    /// Child stream for `key`. Distinct keys give unrelated streams.
    pub fn substream(&self, key: u64) -> Self {
        let mixed = splitmix64(self.stream_id.rotate_left(17) ^ splitmix64(key ^ GOLDEN));
        Self {
            seed: self.seed,
            stream_id: mixed,
        }
    }

    /// Repeated [`RngStream::substream`] along `keys`.
    pub fn substream_path(&self, keys: &[u64]) -> Self {
        keys.iter().fold(*self, |s, &k| s.substream(k))
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(self.seed);
        r.set_stream(self.stream_id);
        r
    }
}

/// `n` independent standard normal draws.
pub fn standard_normal_vector<R: rand::Rng + ?Sized>(rng: &mut R, n: usize) -> Vector {
    Vector::from_iterator(n, (0..n).map(|_| StandardNormal.sample(rng)))
}

/// `rows x cols` matrix of i.i.d. `N(0, variance)` entries, filled row by row
/// from `stream`.
pub fn gaussian_matrix(rows: usize, cols: usize, variance: f64, stream: &RngStream) -> Matrix {
    let sd = variance.sqrt();
    let mut rng = stream.rng();
    let mut out = Matrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            let z: f64 = StandardNormal.sample(&mut rng);
            out[(i, j)] = sd * z;
        }
    }
    out
}
