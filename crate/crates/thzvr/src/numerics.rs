//! Uniform time grids, tabulated distributions, and the convolution
//! machinery the delay pipeline runs on.
//!
//! Everything here works on a shared uniform grid starting at zero. Density
//! convolutions use trapezoid end-corrections; distribution-function
//! convolutions use Stieltjes increments. Both have a direct quadratic-cost
//! implementation and an FFT implementation that agree to floating-point
//! roundoff, so either can serve as a cross-check on the other.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::{Error, Result};

/// Relative tolerance for clamping small scheme-level violations (negative
/// density values, non-monotone distribution dips) without masking bugs.
const CLAMP_REL_TOL: f64 = 1e-9;

/// Uniform grid `t_i = i * step` for `i in 0..len`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    step: f64,
    len: usize,
}

impl Grid {
    pub fn new(step: f64, len: usize) -> Result<Self> {
        if !(step.is_finite() && step > 0.0) {
            return Err(Error::InvalidParameter {
                name: "grid step",
                value: step,
                reason: "must be finite and positive",
            });
        }
        if len < 2 {
            return Err(Error::InvalidParameter {
                name: "grid len",
                value: len as f64,
                reason: "need at least two points",
            });
        }
        Ok(Self { step, len })
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn point(&self, i: usize) -> f64 {
        i as f64 * self.step
    }

    pub fn last(&self) -> f64 {
        self.point(self.len - 1)
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len).map(move |i| self.point(i))
    }

    /// Largest index whose grid point does not exceed `t`, clamped to the grid.
    pub fn index_below(&self, t: f64) -> usize {
        if t <= 0.0 {
            return 0;
        }
        let i = (t / self.step).floor() as usize;
        i.min(self.len - 1)
    }
}

/// Whether tabulated values are a probability density or a distribution
/// function.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DistKind {
    Pdf,
    Cdf,
}

/// How a convolution is evaluated. `Auto` picks by cost; the explicit modes
/// exist so tests can pin the two implementations against each other.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ConvMode {
    #[default]
    Auto,
    Direct,
    Fft,
}

/// Operand-count threshold above which `ConvMode::Auto` switches to FFT.
const AUTO_FFT_THRESHOLD: usize = 1 << 21;

/// A distribution sampled on a uniform grid.
///
/// `lost_mass` records probability mass intentionally excluded when the
/// table was built (clipped or truncated regions); mass that simply lies
/// beyond the grid horizon is visible through [`TabulatedDist::mass`]
/// instead. Binary operations add the operands' lost mass.
#[derive(Clone, Debug)]
pub struct TabulatedDist {
    grid: Grid,
    kind: DistKind,
    values: Vec<f64>,
    lost_mass: f64,
}

impl TabulatedDist {
    pub fn new_pdf(grid: Grid, values: Vec<f64>) -> Result<Self> {
        Self::new(grid, DistKind::Pdf, values)
    }

    pub fn new_cdf(grid: Grid, values: Vec<f64>) -> Result<Self> {
        Self::new(grid, DistKind::Cdf, values)
    }

    fn new(grid: Grid, kind: DistKind, mut values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch {
                left: format!("grid with {} points", grid.len()),
                right: format!("value table with {} points", values.len()),
            });
        }
        let mut max_abs: f64 = 0.0;
        for v in &values {
            if !v.is_finite() {
                return Err(Error::InvalidParameter {
                    name: "distribution value",
                    value: *v,
                    reason: "must be finite",
                });
            }
            max_abs = max_abs.max(v.abs());
        }
        let tol = CLAMP_REL_TOL * max_abs.max(1.0);
        match kind {
            DistKind::Pdf => {
                for v in values.iter_mut() {
                    if *v < -tol {
                        return Err(Error::InvalidParameter {
                            name: "density value",
                            value: *v,
                            reason: "negative beyond clamp tolerance",
                        });
                    }
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
            }
            DistKind::Cdf => {
                let mut running = 0.0f64;
                for v in values.iter_mut() {
                    if *v < running - tol {
                        return Err(Error::InvalidParameter {
                            name: "distribution value",
                            value: *v,
                            reason: "decreasing beyond clamp tolerance",
                        });
                    }
                    running = running.max(*v);
                    *v = running;
                }
            }
        }
        Ok(Self {
            grid,
            kind,
            values,
            lost_mass: 0.0,
        })
    }

    /// Distribution function that is identically one: the law of a value
    /// that is zero with certainty. Neutral element of CDF convolution.
    pub fn unit_step(grid: Grid) -> Self {
        Self {
            grid,
            kind: DistKind::Cdf,
            values: vec![1.0; grid.len()],
            lost_mass: 0.0,
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn kind(&self) -> DistKind {
        self.kind
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn lost_mass(&self) -> f64 {
        self.lost_mass
    }

    pub fn with_lost_mass(mut self, lost: f64) -> Self {
        self.lost_mass = lost;
        self
    }

    /// Probability mass represented on the grid: integral of a density,
    /// final value of a distribution function.
    pub fn mass(&self) -> f64 {
        match self.kind {
            DistKind::Pdf => trapezoid(&self.values, self.grid.step()),
            DistKind::Cdf => *self.values.last().expect("grid has at least two points"),
        }
    }

    /// Value at `t` by linear interpolation. Below zero a density and a
    /// distribution function are both zero; beyond the horizon the last
    /// tabulated value is held.
    pub fn eval(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        let h = self.grid.step();
        let i = self.grid.index_below(t);
        if i + 1 >= self.grid.len() {
            return *self.values.last().expect("non-empty");
        }
        let frac = (t - self.grid.point(i)) / h;
        self.values[i] * (1.0 - frac) + self.values[i + 1] * frac
    }

    /// Cumulative trapezoid integral of a density.
    pub fn to_cdf(&self) -> Result<Self> {
        match self.kind {
            DistKind::Cdf => Ok(self.clone()),
            DistKind::Pdf => {
                let h = self.grid.step();
                let mut cdf = Vec::with_capacity(self.values.len());
                let mut acc = 0.0;
                cdf.push(0.0);
                for w in self.values.windows(2) {
                    acc += 0.5 * h * (w[0] + w[1]);
                    cdf.push(acc);
                }
                Ok(Self::new_cdf(self.grid, cdf)?.with_lost_mass(self.lost_mass))
            }
        }
    }

    /// Successive differences of a distribution function, with the full
    /// initial value as the first entry (an atom at or before zero).
    pub fn increments(&self) -> Vec<f64> {
        debug_assert_eq!(self.kind, DistKind::Cdf);
        let mut inc = Vec::with_capacity(self.values.len());
        let mut prev = 0.0;
        for &v in &self.values {
            inc.push(v - prev);
            prev = v;
        }
        inc
    }

    /// Convolution of two distributions on the same grid.
    ///
    /// Kind matrix: density * density is a density, density * distribution
    /// function is a distribution function, and two distribution functions
    /// combine through Stieltjes increments into a distribution function.
    pub fn convolve(&self, other: &Self) -> Result<Self> {
        self.convolve_with(other, ConvMode::Auto)
    }

    pub fn convolve_with(&self, other: &Self, mode: ConvMode) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch {
                left: format!("{:?}", self.grid),
                right: format!("{:?}", other.grid),
            });
        }
        let lost = self.lost_mass + other.lost_mass;
        let out = match (self.kind, other.kind) {
            (DistKind::Pdf, DistKind::Pdf) => {
                let raw = linear_convolution(&self.values, &other.values, mode);
                let vals = trapezoid_corrected(&raw, &self.values, &other.values, self.grid.step());
                Self::new_pdf(self.grid, vals)?
            }
            (DistKind::Pdf, DistKind::Cdf) => {
                let raw = linear_convolution(&self.values, &other.values, mode);
                let vals = trapezoid_corrected(&raw, &self.values, &other.values, self.grid.step());
                Self::new_cdf(self.grid, vals)?
            }
            (DistKind::Cdf, DistKind::Pdf) => return other.convolve_with(self, mode),
            (DistKind::Cdf, DistKind::Cdf) => {
                let da = self.increments();
                let db = other.increments();
                let dc = linear_convolution(&da, &db, mode);
                let mut acc = 0.0;
                let vals = dc
                    .into_iter()
                    .map(|d| {
                        acc += d;
                        acc
                    })
                    .collect();
                Self::new_cdf(self.grid, vals)?
            }
        };
        Ok(out.with_lost_mass(lost))
    }

    /// n-fold convolution of a distribution function with itself;
    /// `n = 0` is the unit step.
    pub fn nfold_cdf(&self, n: usize) -> Result<Self> {
        debug_assert_eq!(self.kind, DistKind::Cdf);
        let mut acc = Self::unit_step(self.grid);
        for _ in 0..n {
            acc = acc.convolve(self)?;
        }
        Ok(acc)
    }
}

/// Trapezoid integral of uniformly sampled values.
pub fn trapezoid(values: &[f64], step: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let interior: f64 = values[1..values.len() - 1].iter().sum();
    step * (interior + 0.5 * (values[0] + values[values.len() - 1]))
}

/// Largest pointwise gap between two distribution functions on one grid.
pub fn ks_distance(a: &TabulatedDist, b: &TabulatedDist) -> Result<f64> {
    require_same_grid(a, b)?;
    debug_assert!(a.kind() == DistKind::Cdf && b.kind() == DistKind::Cdf);
    Ok(a.values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max))
}

/// Integrated absolute difference between two densities on one grid.
pub fn l1_distance(a: &TabulatedDist, b: &TabulatedDist) -> Result<f64> {
    require_same_grid(a, b)?;
    debug_assert!(a.kind() == DistKind::Pdf && b.kind() == DistKind::Pdf);
    let diff: Vec<f64> = a
        .values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| (x - y).abs())
        .collect();
    Ok(trapezoid(&diff, a.grid().step()))
}

fn require_same_grid(a: &TabulatedDist, b: &TabulatedDist) -> Result<()> {
    if a.grid != b.grid {
        return Err(Error::GridMismatch {
            left: format!("{:?}", a.grid),
            right: format!("{:?}", b.grid),
        });
    }
    Ok(())
}

/// Smallest truncation order `n` such that the geometric tail
/// `w^(n+1) / (1 - w)` drops below `eps`.
pub fn geometric_truncation_order(weight: f64, eps: f64) -> Result<usize> {
    if !(0.0..1.0).contains(&weight) {
        return Err(Error::UnstableQueue { rho: weight });
    }
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::InvalidParameter {
            name: "eps",
            value: eps,
            reason: "must be finite and positive",
        });
    }
    if weight == 0.0 {
        return Ok(0);
    }
    let target = eps * (1.0 - weight);
    let order = (target.ln() / weight.ln() - 1.0).ceil().max(0.0);
    Ok(order as usize)
}

/// Truncated compound-geometric distribution function
/// `(1 - w) * sum_{n=0..=order} w^n * base^(n-fold)`.
///
/// This is the waiting-time series of a single-server queue with Poisson
/// arrivals, where `base` is the residual service distribution and `w` the
/// utilization. The FFT path damps the increment sequence so wraparound from
/// high convolution powers stays below roundoff; the direct path folds the
/// series term by term. Both produce the same discretization.
pub fn geometric_compound_cdf(
    base: &TabulatedDist,
    weight: f64,
    order: usize,
    mode: ConvMode,
) -> Result<TabulatedDist> {
    debug_assert_eq!(base.kind(), DistKind::Cdf);
    if !(0.0..1.0).contains(&weight) {
        return Err(Error::UnstableQueue { rho: weight });
    }
    let lost = base.lost_mass();
    if weight == 0.0 || order == 0 {
        return Ok(TabulatedDist::unit_step(base.grid()).with_lost_mass(lost));
    }
    let use_fft = match mode {
        ConvMode::Direct => false,
        ConvMode::Fft => true,
        ConvMode::Auto => order * base.grid().len().pow(2) > AUTO_FFT_THRESHOLD,
    };
    let out = if use_fft {
        geometric_compound_fft(base, weight, order)?
    } else {
        geometric_compound_direct(base, weight, order)?
    };
    Ok(out.with_lost_mass(lost))
}

fn geometric_compound_direct(
    base: &TabulatedDist,
    weight: f64,
    order: usize,
) -> Result<TabulatedDist> {
    let grid = base.grid();
    let mut fold = TabulatedDist::unit_step(grid);
    let mut total = vec![1.0 - weight; grid.len()];
    let mut coeff = 1.0 - weight;
    for _ in 1..=order {
        fold = fold.convolve_with(base, ConvMode::Auto)?;
        coeff *= weight;
        for (t, v) in total.iter_mut().zip(fold.values()) {
            *t += coeff * v;
        }
    }
    TabulatedDist::new_cdf(grid, total)
}

fn geometric_compound_fft(
    base: &TabulatedDist,
    weight: f64,
    order: usize,
) -> Result<TabulatedDist> {
    let grid = base.grid();
    let n = grid.len();
    // Four-fold padding plus exponential damping: each wraparound of the
    // circular convolution is suppressed by damp^m, and undoing the damping
    // amplifies roundoff by at most damp^-n = 10^3.2.
    let m = (4 * n).next_power_of_two();
    let damp = 10f64.powf(-3.2 / n as f64);
    let mut inc = base.increments();
    let mut scale = 1.0;
    for v in inc.iter_mut() {
        *v *= scale;
        scale *= damp;
    }

    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(m);
    let ifft = planner.plan_fft_inverse(m);

    let mut buf: Vec<Complex<f64>> = inc
        .iter()
        .map(|&v| Complex::new(v, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(m)
        .collect();
    fft.process(&mut buf);

    // Per-bin geometric partial sum (1-w) (1 - (w D)^(order+1)) / (1 - w D).
    // |D| <= sum of increments <= 1, so the denominator stays away from zero
    // for any weight below one.
    for d in buf.iter_mut() {
        let wd = *d * weight;
        let num = Complex::new(1.0, 0.0) - complex_powi(wd, order as u32 + 1);
        *d = num / (Complex::new(1.0, 0.0) - wd) * (1.0 - weight);
    }

    ifft.process(&mut buf);
    let inv_m = 1.0 / m as f64;
    let mut acc = 0.0;
    let mut undo = 1.0;
    let inv_damp = 1.0 / damp;
    let vals: Vec<f64> = buf[..n]
        .iter()
        .map(|c| {
            acc += c.re * inv_m * undo;
            undo *= inv_damp;
            acc
        })
        .collect();
    TabulatedDist::new_cdf(grid, vals)
}

fn complex_powi(base: Complex<f64>, mut exp: u32) -> Complex<f64> {
    let mut result = Complex::new(1.0, 0.0);
    let mut b = base;
    while exp > 0 {
        if exp & 1 == 1 {
            result *= b;
        }
        b *= b;
        exp >>= 1;
    }
    result
}

/// First `len(a)` samples of the linear convolution `sum_j a[j] b[k-j]`.
/// Both inputs live on the same grid, so only causal samples matter and
/// truncation to the grid commutes with further convolutions.
fn linear_convolution(a: &[f64], b: &[f64], mode: ConvMode) -> Vec<f64> {
    let n = a.len();
    let use_fft = match mode {
        ConvMode::Direct => false,
        ConvMode::Fft => true,
        ConvMode::Auto => n * n > AUTO_FFT_THRESHOLD,
    };
    if !use_fft {
        let mut out = vec![0.0; n];
        for (k, o) in out.iter_mut().enumerate() {
            let mut s = 0.0;
            for j in 0..=k {
                s += a[j] * b[k - j];
            }
            *o = s;
        }
        return out;
    }

    let m = (2 * n).next_power_of_two();
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(m);
    let ifft = planner.plan_fft_inverse(m);

    let mut fa: Vec<Complex<f64>> = a
        .iter()
        .map(|&v| Complex::new(v, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(m)
        .collect();
    let mut fb: Vec<Complex<f64>> = b
        .iter()
        .map(|&v| Complex::new(v, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(m)
        .collect();
    fft.process(&mut fa);
    fft.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= y;
    }
    ifft.process(&mut fa);
    let inv_m = 1.0 / m as f64;
    fa[..n].iter().map(|c| c.re * inv_m).collect()
}

/// Turn raw convolution sums into the trapezoid rule for
/// `integral_0^t a(s) b(t-s) ds` by halving the two endpoint terms.
fn trapezoid_corrected(raw: &[f64], a: &[f64], b: &[f64], step: f64) -> Vec<f64> {
    raw.iter()
        .enumerate()
        .map(|(k, &s)| step * (s - 0.5 * (a[0] * b[k] + a[k] * b[0])))
        .collect()
}
