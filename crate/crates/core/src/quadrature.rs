//! Globally adaptive Gauss–Kronrod (7/15) quadrature.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

/// Gauss weights for the odd Kronrod nodes `XGK[1], XGK[3], XGK[5], XGK[7]`.
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

pub const EVALS_PER_PANEL: usize = 15;

#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub evals: usize,
    pub converged: bool,
}

struct Panel {
    tag: usize,
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Single 15-point Kronrod panel with the QUADPACK error heuristic.
fn gk15<F: FnMut(usize, f64) -> f64>(f: &mut F, tag: usize, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(tag, center);
    let mut res_k = fc * WGK[7];
    let mut res_g = fc * WG[3];
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(tag, center - dx);
        let f2 = f(tag, center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = res_k * half;
    res_abs *= half.abs();
    res_asc *= half.abs();
    let mut err = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    (value, err)
}

/// Integrates `f(tag, x)` over the union of tagged segments `(tag, a, b)`.
///
/// Refinement stops once the total error estimate is below
/// `max(abs_tol, rel_tol * |value|)` or when `max_evals` would be exceeded.
pub fn integrate<F: FnMut(usize, f64) -> f64>(
    mut f: F,
    segments: &[(usize, f64, f64)],
    abs_tol: f64,
    rel_tol: f64,
    max_evals: usize,
) -> QuadResult {
    let mut heap = BinaryHeap::with_capacity(32);
    let mut evals = 0;
    let mut value = 0.0;
    let mut error = 0.0;
    for &(tag, a, b) in segments {
        if !(b > a) {
            continue;
        }
        let (v, e) = gk15(&mut f, tag, a, b);
        evals += EVALS_PER_PANEL;
        value += v;
        error += e;
        heap.push(Panel { tag, a, b, value: v, error: e });
    }
    loop {
        let tol = abs_tol.max(rel_tol * value.abs());
        if error <= tol {
            return QuadResult { value, error, evals, converged: true };
        }
        if evals + 2 * EVALS_PER_PANEL > max_evals {
            return QuadResult { value, error, evals, converged: false };
        }
        let Some(worst) = heap.pop() else {
            return QuadResult { value, error, evals, converged: error <= tol };
        };
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            // Interval cannot be split further in floating point.
            return QuadResult { value, error, evals, converged: false };
        }
        let (v1, e1) = gk15(&mut f, worst.tag, worst.a, mid);
        let (v2, e2) = gk15(&mut f, worst.tag, mid, worst.b);
        evals += 2 * EVALS_PER_PANEL;
        value += v1 + v2 - worst.value;
        error += e1 + e2 - worst.error;
        heap.push(Panel { tag: worst.tag, a: worst.a, b: mid, value: v1, error: e1 });
        heap.push(Panel { tag: worst.tag, a: mid, b: worst.b, value: v2, error: e2 });
        if error < 0.0 {
            error = heap.iter().map(|p| p.error).sum();
        }
    }
}
