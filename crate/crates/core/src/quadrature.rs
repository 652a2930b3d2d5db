//! Globally adaptive Gauss–Kronrod (7/15) quadrature on finite intervals.
//!
//! The interval with the largest local error estimate is bisected until the
//! summed estimate falls below the requested absolute tolerance or the
//! subdivision budget is exhausted.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_225,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];

// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Settings for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct QuadratureOptions {
    pub abs_tol: f64,
    pub max_subintervals: usize,
}

impl QuadratureOptions {
    pub fn with_tol(abs_tol: f64) -> Self {
        QuadratureOptions {
            abs_tol,
            ..Default::default()
        }
    }
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        QuadratureOptions {
            abs_tol: 1e-10,
            max_subintervals: 4000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub subintervals: usize,
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}

impl Eq for Segment {}

impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Single 15-point Kronrod evaluation with the embedded 7-point Gauss rule
/// as error estimate.
pub fn gauss_kronrod_15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (k, (&x, &w)) in XGK.iter().zip(WGK.iter()).take(7).enumerate() {
        let dx = half * x;
        let pair = f(center - dx) + f(center + dx);
        kronrod += w * pair;
        if k % 2 == 1 {
            gauss += WG[k / 2] * pair;
        }
    }
    let value = kronrod * half;
    let error = ((kronrod - gauss) * half).abs();
    (value, error)
}

/// Integrates `f` over `[a, b]`, optionally pre-split at `breakpoints`.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    opts: QuadratureOptions,
) -> Result<Estimate> {
    if !(opts.abs_tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "quadrature tolerance must be positive, got {}",
            opts.abs_tol
        )));
    }
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::InvalidParameter(
            "integration bounds must be finite".into(),
        ));
    }
    if a == b {
        return Ok(Estimate {
            value: 0.0,
            error: 0.0,
            subintervals: 0,
        });
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };

    let mut edges = vec![lo];
    edges.extend(breakpoints.iter().copied().filter(|&x| x > lo && x < hi));
    edges.push(hi);
    edges.sort_by(f64::total_cmp);
    edges.dedup();

    let mut heap = BinaryHeap::new();
    for w in edges.windows(2) {
        let (value, error) = gauss_kronrod_15(&f, w[0], w[1]);
        heap.push(Segment {
            a: w[0],
            b: w[1],
            value,
            error,
        });
    }

    loop {
        let (total, err) = heap
            .iter()
            .fold((0.0, 0.0), |(v, e), s| (v + s.value, e + s.error));
        if !total.is_finite() {
            return Err(Error::Quadrature {
                estimate: f64::INFINITY,
                tol: opts.abs_tol,
            });
        }
        if err <= opts.abs_tol {
            return Ok(Estimate {
                value: sign * total,
                error: err,
                subintervals: heap.len(),
            });
        }
        if heap.len() >= opts.max_subintervals {
            return Err(Error::Quadrature {
                estimate: err,
                tol: opts.abs_tol,
            });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Interval can no longer be split in floating point.
            return Err(Error::Quadrature {
                estimate: err,
                tol: opts.abs_tol,
            });
        }
        for (a, b) in [(worst.a, mid), (mid, worst.b)] {
            let (value, error) = gauss_kronrod_15(&f, a, b);
            heap.push(Segment { a, b, value, error });
        }
    }
}
