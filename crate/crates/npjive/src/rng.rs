//! Seeded 64-bit random streams used for fold assignment and data generation.
//!
//! All randomness in the crate flows through [`SplitMix64`] streams keyed by
//! `(seed, stream key)`, so every output is a pure function of its seeds and
//! reproduces bit-for-bit across platforms and worker counts. Gaussian draws
//! use the inverse CDF (Wichura's PPND16 rational approximation); beta draws
//! use Johnk's rejection method for small shapes and Cheng's BB/BC algorithms
//! otherwise, with the algorithm chosen deterministically from `(a, b)`.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
const MIX_MULT: u64 = 0xD134_2543_DE82_EF95;
const LN4: f64 = 1.386_294_361_119_890_6;

/// SplitMix64 finalizer; a bijective 64-bit hash.
#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Combine seed parts (seed, cell index, stream tag, ...) into one stream key.
pub fn mix_seed(parts: &[u64]) -> u64 {
    let mut acc = GOLDEN;
    for &p in parts {
        acc = mix64(acc.wrapping_add(p).wrapping_mul(MIX_MULT));
    }
    acc
}

/// Deterministic 64-bit generator (SplitMix64).
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    /// Stream keyed by `(seed, key...)`; distinct keys give independent streams.
    pub fn stream(seed: u64, keys: &[u64]) -> Self {
        let mut parts = Vec::with_capacity(keys.len() + 1);
        parts.push(seed);
        parts.extend_from_slice(keys);
        SplitMix64::new(mix_seed(&parts))
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        mix64(self.state)
    }

    /// Uniform on [0, 1) with 53 bits of precision.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / 9_007_199_254_740_992.0)
    }

    /// Uniform on the open interval (0, 1); safe to feed to inverse CDFs.
    #[inline]
    pub fn open01(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / 9_007_199_254_740_992.0)
    }

    /// Uniform integer in `0..n` via widening multiply.
    #[inline]
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    /// Gaussian draw via the inverse CDF.
    pub fn normal(&mut self, mean: f64, sd: f64) -> f64 {
        mean + sd * normal_inv_cdf(self.open01())
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        for i in (1..xs.len()).rev() {
            let j = self.below(i + 1);
            xs.swap(i, j);
        }
    }

    /// Beta(a, b) draw. Johnk when both shapes are at most one, Cheng's BB when
    /// both exceed one, Cheng's BC otherwise.
    pub fn beta(&mut self, a: f64, b: f64) -> f64 {
        assert!(a > 0.0 && b > 0.0, "beta shapes must be positive");
        if a <= 1.0 && b <= 1.0 {
            self.beta_johnk(a, b)
        } else if a.min(b) > 1.0 {
            self.beta_cheng_bb(a, b)
        } else {
            self.beta_cheng_bc(a, b)
        }
    }

    fn beta_johnk(&mut self, a: f64, b: f64) -> f64 {
        loop {
            let u = self.open01();
            let v = self.open01();
            let x = u.powf(1.0 / a);
            let y = v.powf(1.0 / b);
            if x + y <= 1.0 {
                if x + y > 0.0 {
                    return x / (x + y);
                }
                // Underflow: fall back to logs.
                let lx = u.ln() / a;
                let ly = v.ln() / b;
                let m = lx.max(ly);
                let ex = (lx - m).exp();
                let ey = (ly - m).exp();
                return ex / (ex + ey);
            }
        }
    }

    fn beta_cheng_bb(&mut self, a0: f64, b0: f64) -> f64 {
        let a = a0.min(b0);
        let b = a0.max(b0);
        let alpha = a + b;
        let beta = ((alpha - 2.0) / (2.0 * a * b - alpha)).sqrt();
        let gamma = a + 1.0 / beta;
        let w = loop {
            let u1 = self.open01();
            let u2 = self.open01();
            let v = beta * (u1 / (1.0 - u1)).ln();
            let mut w = a * v.exp();
            if !w.is_finite() {
                w = f64::MAX;
            }
            let z = u1 * u1 * u2;
            let r = gamma * v - LN4;
            let s = a + r - w;
            if s + 2.609_437_912_434_100_4 >= 5.0 * z {
                break w;
            }
            let t = z.ln();
            if s >= t {
                break w;
            }
            if r + alpha * (alpha / (b + w)).ln() >= t {
                break w;
            }
        };
        if (a0 - a).abs() < f64::EPSILON * a0.abs() {
            w / (b + w)
        } else {
            b / (b + w)
        }
    }

    fn beta_cheng_bc(&mut self, a0: f64, b0: f64) -> f64 {
        let a = a0.max(b0);
        let b = a0.min(b0);
        let alpha = a + b;
        let beta = 1.0 / b;
        let delta = 1.0 + a - b;
        let k1 = delta * (0.013_888_9 + 0.041_666_7 * b) / (a * beta - 0.777_778);
        let k2 = 0.25 + (0.5 + 0.25 / delta) * b;
        let w = 'outer: loop {
            let u1 = self.open01();
            let u2 = self.open01();
            if u1 < 0.5 {
                let y = u1 * u2;
                let z = u1 * y;
                if 0.25 * u2 + z - y >= k1 {
                    continue 'outer;
                }
            } else {
                let z = u1 * u1 * u2;
                if z <= 0.25 {
                    let v = beta * (u1 / (1.0 - u1)).ln();
                    let mut w = a * v.exp();
                    if !w.is_finite() {
                        w = f64::MAX;
                    }
                    break 'outer w;
                }
                if z >= k2 {
                    continue 'outer;
                }
            }
            let z = u1 * u1 * u2;
            let v = beta * (u1 / (1.0 - u1)).ln();
            let mut w = a * v.exp();
            if !w.is_finite() {
                w = f64::MAX;
            }
            if alpha * ((alpha / (b + w)).ln() + v) - LN4 >= z.ln() {
                break 'outer w;
            }
        };
        if (a0 - a).abs() < f64::EPSILON * a0.abs() {
            w / (b + w)
        } else {
            b / (b + w)
        }
    }
}

/// Standard normal quantile function (Wichura's algorithm AS 241, PPND16).
///
/// Absolute error below 1e-15 on (0, 1), well inside the 1e-9 contract used
/// for Wald interval quantiles.
pub fn normal_inv_cdf(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "normal_inv_cdf requires p in (0,1)");
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180_625 - q * q;
        return q * poly7(r, &A_NUM) / poly7(r, &A_DEN);
    }
    let r = if q < 0.0 { p } else { 1.0 - p };
    let mut r = (-r.ln()).sqrt();
    let val = if r <= 5.0 {
        r -= 1.6;
        poly7(r, &C_NUM) / poly7(r, &C_DEN)
    } else {
        r -= 5.0;
        poly7(r, &E_NUM) / poly7(r, &E_DEN)
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

#[inline]
fn poly7(r: f64, c: &[f64; 8]) -> f64 {
    ((((((c[7] * r + c[6]) * r + c[5]) * r + c[4]) * r + c[3]) * r + c[2]) * r + c[1]) * r + c[0]
}

const A_NUM: [f64; 8] = [
    3.387_132_872_796_366_608,
    1.331_416_678_917_843_774_5e2,
    1.971_590_950_306_551_442_7e3,
    1.373_169_376_550_946_112_5e4,
    4.592_195_393_154_987_145_7e4,
    6.726_577_092_700_870_085_3e4,
    3.343_057_558_358_812_810_5e4,
    2.509_080_928_730_122_672_7e3,
];
const A_DEN: [f64; 8] = [
    1.0,
    4.231_333_070_160_091_125_2e1,
    6.871_870_074_920_579_083e2,
    5.394_196_021_424_751_107_7e3,
    2.121_379_430_158_659_586_7e4,
    3.930_789_580_009_271_061e4,
    2.872_908_573_572_194_267_4e4,
    5.226_495_278_852_854_561e3,
];
const C_NUM: [f64; 8] = [
    1.423_437_110_749_683_577_34,
    4.630_337_846_156_545_295_9,
    5.769_497_221_460_691_405_5,
    3.647_848_324_763_204_605_04,
    1.270_458_252_452_368_382_58,
    2.417_807_251_774_506_117_7e-1,
    2.272_384_498_926_918_458_33e-2,
    7.745_450_142_783_414_076_4e-4,
];
const C_DEN: [f64; 8] = [
    1.0,
    2.053_191_626_637_758_821_87,
    1.676_384_830_183_803_849_4,
    6.897_673_349_851_000_045_5e-1,
    1.481_039_764_274_800_745_9e-1,
    1.519_866_656_361_645_719_66e-2,
    5.475_938_084_995_344_946e-4,
    1.050_750_071_644_416_843_24e-9,
];
const E_NUM: [f64; 8] = [
    6.657_904_643_501_103_777_2,
    5.463_784_911_164_114_369_9,
    1.784_826_539_917_291_335_8,
    2.965_605_718_285_048_912_3e-1,
    2.653_218_952_657_612_309_3e-2,
    1.242_660_947_388_078_438_6e-3,
    2.711_555_568_743_487_578_15e-5,
    2.010_334_399_292_288_132_65e-7,
];
const E_DEN: [f64; 8] = [
    1.0,
    5.998_322_065_558_879_376_9e-1,
    1.369_298_809_227_358_053_1e-1,
    1.487_536_129_085_061_485_25e-2,
    7.868_691_311_456_132_591e-4,
    1.846_318_317_510_054_681_8e-5,
    1.421_511_758_316_445_888_7e-7,
    2.044_263_103_389_939_785_64e-15,
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stream_is_deterministic() {
        let mut a = SplitMix64::stream(7, &[3]);
        let mut b = SplitMix64::stream(7, &[3]);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
        let mut c = SplitMix64::stream(7, &[4]);
        assert_ne!(a.next_u64(), c.next_u64());
    }

    #[test]
    fn normal_quantile_reference_values() {
        // Reference values from the standard normal distribution.
        assert!((normal_inv_cdf(0.5) - 0.0).abs() < 1e-15);
        assert!((normal_inv_cdf(0.975) - 1.959_963_984_540_054).abs() < 1e-9);
        assert!((normal_inv_cdf(0.025) + 1.959_963_984_540_054).abs() < 1e-9);
        assert!((normal_inv_cdf(0.995) - 2.575_829_303_548_901).abs() < 1e-9);
        assert!((normal_inv_cdf(1e-10) + 6.361_340_902_404_056).abs() < 1e-8);
        assert!((normal_inv_cdf(0.841_344_746_068_542_9) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn uniform_in_range() {
        let mut rng = SplitMix64::new(1);
        for _ in 0..10_000 {
            let u = rng.uniform();
            assert!((0.0..1.0).contains(&u));
            let o = rng.open01();
            assert!(o > 0.0 && o < 1.0);
        }
    }

    fn beta_moments(a: f64, b: f64, n: usize, seed: u64) -> (f64, f64) {
        let mut rng = SplitMix64::new(seed);
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in 0..n {
            let x = rng.beta(a, b);
            assert!((0.0..=1.0).contains(&x), "beta draw out of range: {x}");
            sum += x;
            sumsq += x * x;
        }
        let mean = sum / n as f64;
        (mean, sumsq / n as f64 - mean * mean)
    }

    #[test]
    fn beta_moments_match_all_branches() {
        // (a,b) triples covering Johnk, Cheng BB and Cheng BC.
        for &(a, b) in &[(0.5, 0.7), (2.0, 5.0), (5.0, 2.0), (8.0, 8.0), (0.4, 3.0), (3.0, 0.4)] {
            let n = 200_000;
            let (mean, var) = beta_moments(a, b, n, 42);
            let m = a / (a + b);
            let v = a * b / ((a + b) * (a + b) * (a + b + 1.0));
            let tol_m = 4.0 * (v / n as f64).sqrt();
            assert!((mean - m).abs() < tol_m, "mean off for ({a},{b}): {mean} vs {m}");
            assert!((var - v).abs() < 0.05 * v + 1e-4, "var off for ({a},{b}): {var} vs {v}");
        }
    }

    #[test]
    fn below_is_unbiased_enough() {
        let mut rng = SplitMix64::new(9);
        let mut counts = [0usize; 5];
        for _ in 0..50_000 {
            counts[rng.below(5)] += 1;
        }
        for &c in &counts {
            assert!((c as f64 - 10_000.0).abs() < 500.0);
        }
    }
}
