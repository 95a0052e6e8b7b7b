//! Globally adaptive Gauss–Kronrod (7/15) quadrature with user breakpoints.
//!
//! Integrands may be vector valued: every component is integrated on the same
//! subdivision, and a cell is refined while any component's error estimate
//! dominates. Breakpoints split the initial interval so that known kinks and
//! jumps sit on cell boundaries.

use alloc::collections::BinaryHeap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureConfig {
    /// Absolute tolerance per unit length of the integration range.
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-9,
            rel_tol: 1e-8,
            max_subdivisions: 1 << 16,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(Error::InvalidProblem(alloc::format!(
                "quadrature tolerances must be positive (abs {}, rel {})",
                self.abs_tol,
                self.rel_tol
            )));
        }
        if self.max_subdivisions < 8 {
            return Err(Error::InvalidProblem(
                "max_subdivisions must be at least 8".into(),
            ));
        }
        Ok(())
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_3,
    0.949_107_912_342_758_524_526_189_684_047_9,
    0.864_864_423_359_769_072_789_712_788_640_9,
    0.741_531_185_599_394_439_863_864_773_280_8,
    0.586_087_235_467_691_130_294_144_845_693_0,
    0.405_845_151_377_397_166_906_606_412_076_96,
    0.207_784_955_007_898_467_600_689_403_773_2,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_97,
    0.063_092_092_629_978_553_290_700_663_189_2,
    0.104_790_010_322_250_183_839_876_322_541_5,
    0.140_653_259_715_525_918_745_189_590_510_2,
    0.169_004_726_639_267_902_826_583_426_598_6,
    0.190_350_578_064_785_409_913_256_402_421_0,
    0.204_432_940_075_298_892_414_161_999_234_6,
    0.209_482_141_084_727_828_012_999_174_891_7,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_1,
    0.279_705_391_489_276_667_901_467_771_423_8,
    0.381_830_050_505_118_944_950_369_775_488_98,
    0.417_959_183_673_469_387_755_102_040_816_3,
];

/// Result of an adaptive integration.
#[derive(Debug, Clone, PartialEq)]
pub struct Integral {
    pub values: Vec<f64>,
    pub errors: Vec<f64>,
    pub subdivisions: usize,
}

struct Cell {
    a: f64,
    b: f64,
    values: Vec<f64>,
    errors: Vec<f64>,
    priority: f64,
}

impl PartialEq for Cell {
    fn eq(&self, other: &Self) -> bool {
        self.priority.total_cmp(&other.priority) == Ordering::Equal
    }
}
impl Eq for Cell {}
impl PartialOrd for Cell {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Cell {
    fn cmp(&self, other: &Self) -> Ordering {
        // ties broken by position so the refinement order is deterministic
        self.priority
            .total_cmp(&other.priority)
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

fn rescale(err: f64, resabs: f64, resasc: f64) -> f64 {
    let mut e = err.abs();
    if resasc != 0.0 && e != 0.0 {
        let scale = libm::pow(200.0 * e / resasc, 1.5);
        e = if scale < 1.0 { resasc * scale } else { resasc };
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        e = e.max(50.0 * f64::EPSILON * resabs);
    }
    e
}

/// One 15-point Kronrod rule on `[a, b]` for a `dim`-valued integrand.
fn kronrod<F: FnMut(f64, &mut [f64])>(
    f: &mut F,
    a: f64,
    b: f64,
    dim: usize,
    buf: &mut [Vec<f64>; 15],
) -> (Vec<f64>, Vec<f64>) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    f(center, &mut buf[0]);
    for j in 0..7 {
        let dx = half * XGK[j];
        let (lo, hi) = buf.split_at_mut(2 * j + 2);
        f(center - dx, &mut lo[2 * j + 1]);
        f(center + dx, &mut hi[0]);
    }
    let mut values = vec![0.0; dim];
    let mut errors = vec![0.0; dim];
    for c in 0..dim {
        let fc = buf[0][c];
        let mut res_k = WGK[7] * fc;
        let mut res_g = WG[3] * fc;
        let mut resabs = res_k.abs();
        for j in 0..7 {
            let f1 = buf[2 * j + 1][c];
            let f2 = buf[2 * j + 2][c];
            res_k += WGK[j] * (f1 + f2);
            resabs += WGK[j] * (f1.abs() + f2.abs());
            if j % 2 == 1 {
                res_g += WG[j / 2] * (f1 + f2);
            }
        }
        let mean = 0.5 * res_k;
        let mut resasc = WGK[7] * (fc - mean).abs();
        for j in 0..7 {
            resasc += WGK[j] * ((buf[2 * j + 1][c] - mean).abs() + (buf[2 * j + 2][c] - mean).abs());
        }
        let h = half.abs();
        values[c] = res_k * half;
        errors[c] = rescale((res_k - res_g) * half, resabs * h, resasc * h);
    }
    (values, errors)
}

/// Integrates a `dim`-valued integrand over `[points[0], points.last()]`.
///
/// `points` must be non-decreasing; interior points become initial cell
/// boundaries. Each component `c` must meet
/// `Σ err_c ≤ max(abs_tol, rel_tol · |value_c|)`.
pub fn integrate_vec<F: FnMut(f64, &mut [f64])>(
    mut f: F,
    dim: usize,
    points: &[f64],
    abs_tol: f64,
    rel_tol: f64,
    max_subdivisions: usize,
) -> Result<Integral> {
    let mut pts: Vec<f64> = points.to_vec();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let mut buf: [Vec<f64>; 15] = core::array::from_fn(|_| vec![0.0; dim]);
    if pts.len() < 2 {
        return Ok(Integral {
            values: vec![0.0; dim],
            errors: vec![0.0; dim],
            subdivisions: 0,
        });
    }
    let priority = |errors: &[f64]| errors.iter().fold(0.0f64, |m, e| m.max(*e));
    let mut heap = BinaryHeap::new();
    let mut total = vec![0.0; dim];
    let mut total_err = vec![0.0; dim];
    for w in pts.windows(2) {
        let (values, errors) = kronrod(&mut f, w[0], w[1], dim, &mut buf);
        for c in 0..dim {
            total[c] += values[c];
            total_err[c] += errors[c];
        }
        heap.push(Cell {
            a: w[0],
            b: w[1],
            priority: priority(&errors),
            values,
            errors,
        });
    }
    let converged = |total: &[f64], total_err: &[f64]| {
        (0..dim).all(|c| total_err[c] <= abs_tol.max(rel_tol * total[c].abs()))
    };
    let mut subdivisions = heap.len();
    while !converged(&total, &total_err) {
        if subdivisions >= max_subdivisions {
            return Err(Error::Quadrature {
                achieved_error: total_err.iter().fold(0.0f64, |m, e| m.max(*e)),
                subdivisions,
            });
        }
        let cell = heap.pop().expect("heap holds every cell");
        let mid = 0.5 * (cell.a + cell.b);
        if !(mid > cell.a && mid < cell.b) {
            // no representable midpoint left
            return Err(Error::Quadrature {
                achieved_error: total_err.iter().fold(0.0f64, |m, e| m.max(*e)),
                subdivisions,
            });
        }
        let (v1, e1) = kronrod(&mut f, cell.a, mid, dim, &mut buf);
        let (v2, e2) = kronrod(&mut f, mid, cell.b, dim, &mut buf);
        for c in 0..dim {
            total[c] += v1[c] + v2[c] - cell.values[c];
            total_err[c] += e1[c] + e2[c] - cell.errors[c];
        }
        heap.push(Cell {
            a: cell.a,
            b: mid,
            priority: priority(&e1),
            values: v1,
            errors: e1,
        });
        heap.push(Cell {
            a: mid,
            b: cell.b,
            priority: priority(&e2),
            values: v2,
            errors: e2,
        });
        subdivisions += 1;
    }
    // Re-sum from the cells in position order so the result does not depend
    // on the history of incremental updates.
    let mut cells = heap.into_vec();
    cells.sort_by(|x, y| x.a.total_cmp(&y.a));
    let mut values = vec![0.0; dim];
    let mut errors = vec![0.0; dim];
    for cell in &cells {
        for c in 0..dim {
            values[c] += cell.values[c];
            errors[c] += cell.errors[c];
        }
    }
    Ok(Integral {
        values,
        errors,
        subdivisions,
    })
}

/// Scalar convenience wrapper around [`integrate_vec`].
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    points: &[f64],
    abs_tol: f64,
    rel_tol: f64,
    max_subdivisions: usize,
) -> Result<f64> {
    let r = integrate_vec(
        |x, out| out[0] = f(x),
        1,
        points,
        abs_tol,
        rel_tol,
        max_subdivisions,
    )?;
    Ok(r.values[0])
}
