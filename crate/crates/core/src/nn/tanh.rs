//! Hyperbolic tangent for the hot loops. `f64::tanh` goes through libm and
//! costs ~20 ns per call, which dominated GNN inference; this version is a
//! branch-light polynomial `expm1` and stays within a few ulp of libm.

const LN2_HI: f64 = 6.931_471_803_691_238e-1;
const LN2_LO: f64 = 1.908_214_929_270_587_7e-10;
const INV_LN2: f64 = std::f64::consts::LOG2_E;
/// Adding and subtracting 1.5·2⁵² rounds to the nearest integer.
const ROUND_MAGIC: f64 = 6_755_399_441_055_744.0;
/// `tanh(x)` is exactly ±1 in f64 beyond this.
const SATURATE: f64 = 19.5;

/// `eʸ − 1` for `y ∈ [−39, 0]`.
#[inline(always)]
fn expm1_nonpositive(y: f64) -> f64 {
    let shifted = y * INV_LN2 + ROUND_MAGIC;
    let k = shifted - ROUND_MAGIC;
    let r = (y - k * LN2_HI) - k * LN2_LO;
    // Taylor series of expm1 on |r| ≤ ln2/2; the truncation term is < 1e-17.
    // Plain multiply-add: `mul_add` is a libm call without hardware FMA.
    // Estrin's scheme: shorter dependency chains than Horner.
    let r2 = r * r;
    let r4 = r2 * r2;
    let r8 = r4 * r4;
    let c01 = 0.5 + r * (1.0 / 6.0);
    let c23 = 1.0 / 24.0 + r * (1.0 / 120.0);
    let c45 = 1.0 / 720.0 + r * (1.0 / 5_040.0);
    let c67 = 1.0 / 40_320.0 + r * (1.0 / 362_880.0);
    let c89 = 1.0 / 3_628_800.0 + r * (1.0 / 39_916_800.0);
    let c1011 = 1.0 / 479_001_600.0 + r * (1.0 / 6_227_020_800.0);
    let lo = (c01 + r2 * c23) + r4 * (c45 + r2 * c67);
    let hi = c89 + r2 * c1011;
    let p = lo + r8 * hi;
    let em = r * r * p + r;
    // The low mantissa bits of `shifted` hold k in two's complement; integer
    // ops on them (instead of an f64 -> i64 cast) keep the loop vectorizable.
    let scale = f64::from_bits(shifted.to_bits().wrapping_add(1023) << 52);
    scale * em + (scale - 1.0)
}

#[inline(always)]
pub fn tanh(x: f64) -> f64 {
    // Written as a comparison so NaN passes through (`f64::min` would drop it).
    let a = if x.abs() > SATURATE { SATURATE } else { x.abs() };
    let m = expm1_nonpositive(-2.0 * a);
    (-m / (2.0 + m)).copysign(x)
}

/// Applies [`tanh`] elementwise, using AVX-512 or AVX2 code when the CPU has
/// it. Every path performs the same IEEE operations, so results are identical.
pub fn tanh_in_place(values: &mut [f64]) {
    #[cfg(target_arch = "x86_64")]
    {
        if std::arch::is_x86_feature_detected!("avx512f") {
            // SAFETY: AVX-512F support was detected on this CPU just above.
            unsafe { tanh_in_place_avx512(values) };
            return;
        }
        if std::arch::is_x86_feature_detected!("avx2") {
            // SAFETY: AVX2 support was detected on this CPU just above.
            unsafe { tanh_in_place_avx2(values) };
            return;
        }
    }
    tanh_in_place_portable(values);
}

#[inline(always)]
fn tanh_in_place_portable(values: &mut [f64]) {
    for v in values {
        *v = tanh(*v);
    }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn tanh_in_place_avx2(values: &mut [f64]) {
    tanh_in_place_portable(values);
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx512f")]
unsafe fn tanh_in_place_avx512(values: &mut [f64]) {
    tanh_in_place_portable(values);
}
