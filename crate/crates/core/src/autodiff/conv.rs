//! Convolution kernels on raw row-major slices.
//!
//! A fractional-dilation tap at offset `m` reads the input at `t + m·d`.
//! Because `t` is an integer, every output sample of one tap shares the same
//! integer shift `s = ⌊m·d⌋` and interpolation weight `f = m·d − s`, so a tap
//! is one shifted, two-point-interpolated copy of the input followed by a
//! dense `[out_ch, in_ch] × [in_ch, T]` contraction.

use serde::{Deserialize, Serialize};

use super::D_MIN;

/// Where the kernel taps sit relative to the output sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PaddingPolicy {
    /// Centered taps `m ∈ {−(k−1)/2, …, (k−1)/2}` with zero padding on both sides.
    #[default]
    Same,
    /// Taps `m ∈ {−(k−1), …, 0}`: the output only looks at the past.
    Causal,
}

impl PaddingPolicy {
    pub fn tap_offset(self, tap: usize, k: usize) -> isize {
        match self {
            PaddingPolicy::Same => tap as isize - ((k - 1) / 2) as isize,
            PaddingPolicy::Causal => tap as isize - (k - 1) as isize,
        }
    }

    /// True when some tap of a `k`-tap kernel sits exactly on a sample at
    /// dilation `d`. The output is only one-sided differentiable in `d` there.
    pub fn has_kink(self, k: usize, d: f64) -> bool {
        (0..k).any(|j| {
            let m = self.tap_offset(j, k);
            m != 0 && (m as f64 * d).fract() == 0.0
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct TapShift {
    pub offset: isize,
    pub shift: isize,
    pub frac: f64,
}

impl TapShift {
    pub fn new(offset: isize, dilation: f64) -> Self {
        let u = offset as f64 * dilation;
        let s = u.floor();
        Self {
            offset,
            shift: s as isize,
            frac: u - s,
        }
    }
}

#[inline]
fn at(row: &[f64], i: isize) -> f64 {
    if i >= 0 && (i as usize) < row.len() {
        row[i as usize]
    } else {
        0.0
    }
}

/// `out[c, t] = (1−f)·x[c, t+s] + f·x[c, t+s+1]`, zero outside the signal.
pub(crate) fn interpolate_shifted(x: &[f64], len: usize, tap: TapShift, out: &mut [f64]) {
    let f = tap.frac;
    for (row, dst) in x.chunks_exact(len).zip(out.chunks_exact_mut(len)) {
        if f == 0.0 {
            for (t, o) in dst.iter_mut().enumerate() {
                *o = at(row, t as isize + tap.shift);
            }
        } else {
            for (t, o) in dst.iter_mut().enumerate() {
                let i = t as isize + tap.shift;
                *o = (1.0 - f) * at(row, i) + f * at(row, i + 1);
            }
        }
    }
}

/// Adjoint of [`interpolate_shifted`] with respect to `x`.
fn scatter_shifted(g: &[f64], len: usize, tap: TapShift, gx: &mut [f64]) {
    let f = tap.frac;
    for (grow, dst) in g.chunks_exact(len).zip(gx.chunks_exact_mut(len)) {
        for (t, &gv) in grow.iter().enumerate() {
            let i = t as isize + tap.shift;
            if i >= 0 && (i as usize) < len {
                dst[i as usize] += (1.0 - f) * gv;
            }
            if f != 0.0 && i + 1 >= 0 && ((i + 1) as usize) < len {
                dst[(i + 1) as usize] += f * gv;
            }
        }
    }
}

/// `Σ_{c,t} g[c,t] · ∂x̂[c,t]/∂u` for one tap.
///
/// At an integer read position the interpolant has a kink; we take the
/// left limit in `d`, which for positive offsets means the segment below.
/// At `d = D_MIN` only the right limit is feasible, so that one is used.
fn slope_dot(x: &[f64], g: &[f64], len: usize, tap: TapShift, dilation: f64) -> f64 {
    let left_in_d = dilation > D_MIN;
    let left = tap.frac == 0.0 && (tap.offset > 0) == left_in_d;
    let mut acc = 0.0;
    for (row, grow) in x.chunks_exact(len).zip(g.chunks_exact(len)) {
        for (t, &gv) in grow.iter().enumerate() {
            let i = t as isize + tap.shift;
            let slope = if left {
                at(row, i) - at(row, i - 1)
            } else {
                at(row, i + 1) - at(row, i)
            };
            acc += gv * slope;
        }
    }
    acc
}

/// Strided view used to describe gemm operands.
#[derive(Clone, Copy)]
pub(crate) struct Strides {
    pub row: usize,
    pub col: usize,
}

impl Strides {
    pub const fn rows(n: usize) -> Self {
        Self { row: n, col: 1 }
    }
}

fn max_index(rows: usize, cols: usize, s: Strides) -> usize {
    (rows - 1) * s.row + (cols - 1) * s.col
}

/// `c[m×n] += a[m×k] · b[k×n]`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm_acc(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    sa: Strides,
    b: &[f64],
    sb: Strides,
    c: &mut [f64],
    sc: Strides,
) {
    if m == 0 || k == 0 || n == 0 {
        return;
    }
    assert!(max_index(m, k, sa) < a.len());
    assert!(max_index(k, n, sb) < b.len());
    assert!(max_index(m, n, sc) < c.len());
    // SAFETY: every index the kernel touches is bounded by the asserts above
    // and `c` does not alias `a` or `b` (distinct borrows).
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            sa.row as isize,
            sa.col as isize,
            b.as_ptr(),
            sb.row as isize,
            sb.col as isize,
            1.0,
            c.as_mut_ptr(),
            sc.row as isize,
            sc.col as isize,
        );
    }
}

/// Geometry of one fractional-dilation convolution.
#[derive(Debug, Clone, Copy)]
pub(crate) struct FracConv {
    pub in_ch: usize,
    pub out_ch: usize,
    pub taps: usize,
    pub len: usize,
    pub dilation: f64,
    pub padding: PaddingPolicy,
}

impl FracConv {
    fn taps(&self) -> impl Iterator<Item = (usize, TapShift)> + '_ {
        (0..self.taps).map(move |j| {
            (
                j,
                TapShift::new(self.padding.tap_offset(j, self.taps), self.dilation),
            )
        })
    }

    pub fn forward(&self, x: &[f64], w: &[f64]) -> Vec<f64> {
        let (c, o, k, t) = (self.in_ch, self.out_ch, self.taps, self.len);
        let mut out = vec![0.0; o * t];
        let mut shifted = vec![0.0; c * t];
        for (j, tap) in self.taps() {
            interpolate_shifted(x, t, tap, &mut shifted);
            gemm_acc(
                o,
                c,
                t,
                &w[j..],
                Strides { row: c * k, col: k },
                &shifted,
                Strides::rows(t),
                &mut out,
                Strides::rows(t),
            );
        }
        out
    }

    /// Accumulates gradients into whichever of `gx`, `gw`, `gd` are present.
    pub fn backward(
        &self,
        x: &[f64],
        w: &[f64],
        gout: &[f64],
        mut gx: Option<&mut [f64]>,
        mut gw: Option<&mut [f64]>,
        mut gd: Option<&mut f64>,
    ) {
        let (c, o, k, t) = (self.in_ch, self.out_ch, self.taps, self.len);
        let need_shifted_grad = gx.is_some() || gd.is_some();
        let mut shifted = vec![0.0; c * t];
        let mut gshifted = vec![0.0; c * t];
        for (j, tap) in self.taps() {
            if let Some(gw) = gw.as_deref_mut() {
                interpolate_shifted(x, t, tap, &mut shifted);
                gemm_acc(
                    o,
                    t,
                    c,
                    gout,
                    Strides::rows(t),
                    &shifted,
                    Strides { row: 1, col: t },
                    &mut gw[j..],
                    Strides { row: c * k, col: k },
                );
            }
            if !need_shifted_grad {
                continue;
            }
            gshifted.iter_mut().for_each(|v| *v = 0.0);
            gemm_acc(
                c,
                o,
                t,
                &w[j..],
                Strides { row: k, col: c * k },
                gout,
                Strides::rows(t),
                &mut gshifted,
                Strides::rows(t),
            );
            if let Some(gx) = gx.as_deref_mut() {
                scatter_shifted(&gshifted, t, tap, gx);
            }
            if let Some(gd) = gd.as_deref_mut() {
                if tap.offset != 0 {
                    *gd += tap.offset as f64 * slope_dot(x, &gshifted, t, tap, self.dilation);
                }
            }
        }
    }
}

/// Pointwise (1×1) convolution `out = W·x + b` over `[in_ch, T]`.
pub(crate) fn pointwise_forward(
    x: &[f64],
    in_ch: usize,
    len: usize,
    w: &[f64],
    out_ch: usize,
    bias: Option<&[f64]>,
) -> Vec<f64> {
    let mut out = vec![0.0; out_ch * len];
    if let Some(b) = bias {
        for (row, &bv) in out.chunks_exact_mut(len).zip(b) {
            row.iter_mut().for_each(|v| *v = bv);
        }
    }
    gemm_acc(
        out_ch,
        in_ch,
        len,
        w,
        Strides::rows(in_ch),
        x,
        Strides::rows(len),
        &mut out,
        Strides::rows(len),
    );
    out
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn pointwise_backward(
    x: &[f64],
    in_ch: usize,
    len: usize,
    w: &[f64],
    out_ch: usize,
    gout: &[f64],
    gx: Option<&mut [f64]>,
    gw: Option<&mut [f64]>,
    gb: Option<&mut [f64]>,
) {
    if let Some(gw) = gw {
        gemm_acc(
            out_ch,
            len,
            in_ch,
            gout,
            Strides::rows(len),
            x,
            Strides { row: 1, col: len },
            gw,
            Strides::rows(in_ch),
        );
    }
    if let Some(gx) = gx {
        gemm_acc(
            in_ch,
            out_ch,
            len,
            w,
            Strides { row: 1, col: in_ch },
            gout,
            Strides::rows(len),
            gx,
            Strides::rows(len),
        );
    }
    if let Some(gb) = gb {
        for (g, row) in gb.iter_mut().zip(gout.chunks_exact(len)) {
            *g += row.iter().sum::<f64>();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kinks_sit_where_taps_hit_samples() {
        assert!(!PaddingPolicy::Same.has_kink(3, 1.5));
        assert!(PaddingPolicy::Same.has_kink(5, 1.5));
        assert!(PaddingPolicy::Causal.has_kink(3, 1.5));
        assert!(!PaddingPolicy::Causal.has_kink(5, 1.3));
        assert!(PaddingPolicy::Same.has_kink(3, 2.0));
        assert!(!PaddingPolicy::Same.has_kink(1, 2.0));
    }

    #[test]
    fn tap_offsets() {
        let same: Vec<_> = (0..5).map(|j| PaddingPolicy::Same.tap_offset(j, 5)).collect();
        assert_eq!(same, vec![-2, -1, 0, 1, 2]);
        let causal: Vec<_> = (0..3).map(|j| PaddingPolicy::Causal.tap_offset(j, 3)).collect();
        assert_eq!(causal, vec![-2, -1, 0]);
    }

    #[test]
    fn negative_fractional_shift() {
        let tap = TapShift::new(-1, 1.5);
        assert_eq!(tap.shift, -2);
        assert!((tap.frac - 0.5).abs() < 1e-15);
    }

    #[test]
    fn gemm_matches_naive() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]; // 2x3
        let b = [1.0, 0.0, 0.0, 1.0, 1.0, 1.0]; // 3x2
        let mut c = [0.0; 4];
        gemm_acc(2, 3, 2, &a, Strides::rows(3), &b, Strides::rows(2), &mut c, Strides::rows(2));
        assert_eq!(c, [4.0, 5.0, 10.0, 11.0]);
    }
}
