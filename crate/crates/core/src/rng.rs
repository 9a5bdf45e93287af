//! Philox4x32-10 counter-based generator. A draw is a pure function of
//! `(seed, path, index)`, so any partition of paths across threads yields
//! the same numbers.

use crate::quadrature::norm_inv;

const M0: u32 = 0xD251_1F53;
const M1: u32 = 0xCD9E_8D57;
const W0: u32 = 0x9E37_79B9;
const W1: u32 = 0xBB67_AE85;

#[inline]
fn mulhilo(a: u32, b: u32) -> (u32, u32) {
    let p = u64::from(a) * u64::from(b);
    ((p >> 32) as u32, p as u32)
}

/// Ten Philox rounds on `counter` under `key`.
pub fn philox4x32(counter: [u32; 4], key: [u32; 2]) -> [u32; 4] {
    let mut c = counter;
    let mut k = key;
    for round in 0..10 {
        if round > 0 {
            k[0] = k[0].wrapping_add(W0);
            k[1] = k[1].wrapping_add(W1);
        }
        let (hi0, lo0) = mulhilo(M0, c[0]);
        let (hi1, lo1) = mulhilo(M1, c[2]);
        c = [hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0];
    }
    c
}

/// Draw stream of one simulated path.
#[derive(Debug, Clone)]
pub struct PathStream {
    key: [u32; 2],
    path: u64,
    index: u64,
    buffer: [u32; 4],
    used: usize,
}

impl PathStream {
    pub fn new(seed: u64, path: u64) -> Self {
        Self {
            key: [seed as u32, (seed >> 32) as u32],
            path,
            index: 0,
            buffer: [0; 4],
            used: 4,
        }
    }

    fn next_u64(&mut self) -> u64 {
        if self.used == 4 {
            let counter = [
                self.index as u32,
                (self.index >> 32) as u32,
                self.path as u32,
                (self.path >> 32) as u32,
            ];
            self.buffer = philox4x32(counter, self.key);
            self.index += 1;
            self.used = 0;
        }
        let v = (u64::from(self.buffer[self.used]) << 32) | u64::from(self.buffer[self.used + 1]);
        self.used += 2;
        v
    }

    /// Uniform on the open interval (0, 1) with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal by inverse CDF; one uniform per draw.
    pub fn normal(&mut self) -> f64 {
        norm_inv(self.uniform())
    }
}
