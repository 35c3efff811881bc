//! Globally adaptive Gauss-Kronrod (7, 15) quadrature.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadControl {
    pub abs_tol: f64,
    /// Relative floor on the tolerance, for integrands with large values.
    pub rel_tol: f64,
    /// Bisection depth below which an interval is no longer split.
    pub max_depth: u32,
    /// Integrand evaluations after which no interval is split further.
    pub max_evals: usize,
}

impl Default for QuadControl {
    fn default() -> Self {
        QuadControl { abs_tol: 1e-9, rel_tol: 1e-12, max_depth: 50, max_evals: 20_000 }
    }
}

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
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
/// Gauss weights for the odd-indexed Kronrod nodes, centre last.
const WG: [f64; 4] = [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    depth: u32,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}

impl Eq for Piece {}

impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn rule<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64, depth: u32) -> Piece {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let pair = f(c - dx) + f(c + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    Piece { a, b, value: kronrod * h, error: ((kronrod - gauss) * h).abs(), depth }
}

/// `int_a^b f` to roughly `max(abs_tol, rel_tol |estimate|)`. Returns NaN if `f` does.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, ctrl: &QuadControl) -> f64 {
    if a == b {
        return 0.0;
    }
    let first = rule(&mut f, a, b, 0);
    let mut evals = 15;
    let (mut total, mut error) = (first.value, first.error);
    let mut heap = BinaryHeap::from([first]);
    let mut settled = 0.0;
    while !heap.is_empty() {
        let tol = ctrl.abs_tol.max(ctrl.rel_tol * total.abs());
        if !total.is_finite() || error <= tol || evals + 30 > ctrl.max_evals {
            break;
        }
        let worst = heap.pop().unwrap();
        let m = 0.5 * (worst.a + worst.b);
        if worst.depth >= ctrl.max_depth || m <= worst.a || m >= worst.b {
            settled += worst.value;
            error -= worst.error;
            total = settled + heap.iter().map(|p| p.value).sum::<f64>();
            continue;
        }
        let left = rule(&mut f, worst.a, m, worst.depth + 1);
        let right = rule(&mut f, m, worst.b, worst.depth + 1);
        evals += 30;
        total += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }
    settled + heap.iter().map(|p| p.value).sum::<f64>()
}
