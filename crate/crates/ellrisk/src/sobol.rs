//! Sobol low-discrepancy sequence (up to 10 dimensions) with random digital
//! shift scrambling, generated in Gray-code order.

use rand::Rng;

/// Primitive-polynomial degrees, encoded middle coefficients, and initial
/// direction numbers for dimensions 2..=10 (dimension 1 is the van der
/// Corput sequence). Standard Joe–Kuo table entries.
const POLY: [(u32, u32, &[u32]); 9] = [
    (1, 0, &[1]),
    (2, 1, &[1, 3]),
    (3, 1, &[1, 3, 1]),
    (3, 2, &[1, 1, 1]),
    (4, 1, &[1, 1, 3, 3]),
    (4, 4, &[1, 3, 5, 13]),
    (5, 2, &[1, 1, 5, 5, 17]),
    (5, 4, &[1, 1, 5, 5, 5]),
    (5, 7, &[1, 1, 7, 11, 19]),
];

const BITS: usize = 32;

pub const MAX_DIM: usize = 10;

/// Sobol point generator with a fixed per-dimension digital shift.
pub struct ScrambledSobol {
    direction: Vec<[u32; BITS]>,
    state: Vec<u32>,
    shift: Vec<u32>,
    index: u64,
}

impl ScrambledSobol {
    /// A `dim`-dimensional sequence scrambled by XOR with random integers
    /// drawn from `rng`.
    pub fn new<R: Rng>(dim: usize, rng: &mut R) -> Self {
        assert!(
            (1..=MAX_DIM).contains(&dim),
            "sobol supports 1..=10 dimensions"
        );
        let mut direction = Vec::with_capacity(dim);

        // dimension 1: van der Corput
        let mut v = [0u32; BITS];
        for (k, vk) in v.iter_mut().enumerate() {
            *vk = 1 << (31 - k);
        }
        direction.push(v);

        for d in 1..dim {
            let (s, a, m) = POLY[d - 1];
            let s = s as usize;
            let mut v = [0u32; BITS];
            for k in 0..s.min(BITS) {
                v[k] = m[k] << (31 - k);
            }
            for k in s..BITS {
                let prev = v[k - s];
                v[k] = prev ^ (prev >> s);
                for i in 1..s {
                    if (a >> (s - 1 - i)) & 1 == 1 {
                        v[k] ^= v[k - i];
                    }
                }
            }
            direction.push(v);
        }

        let shift: Vec<u32> = (0..dim).map(|_| rng.gen::<u32>()).collect();
        Self {
            direction,
            state: vec![0u32; dim],
            shift,
            index: 0,
        }
    }

    /// Writes the next point into `out` (components in [0, 1)).
    pub fn next_point(&mut self, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.state.len());
        if self.index > 0 {
            let bit = self.index.trailing_zeros() as usize;
            let bit = bit.min(BITS - 1);
            for (d, s) in self.state.iter_mut().enumerate() {
                *s ^= self.direction[d][bit];
            }
        }
        self.index += 1;
        const SCALE: f64 = 1.0 / 4294967296.0; // 2^-32
        for (d, o) in out.iter_mut().enumerate() {
            *o = ((self.state[d] ^ self.shift[d]) as f64 + 0.5) * SCALE;
        }
    }
}
