//! Uniform cubical grids on `[-L, L]^N` and scalar fields living on them.
//!
//! Two discretizations share one layout. Periodic grids use spectral
//! differentiation (point counts must be powers of two so the FFT path is
//! exercised as planned); Dirichlet grids use second-order centered
//! differences with zero values just outside the box. Coordinates along
//! each axis are `x_k = -L + k h` with `h = 2L / M`, and all integrals are
//! rectangle-rule sums `h^N * sum(values)`, which is spectrally accurate
//! for smooth periodic data.

use crate::fft::{freq_index, NdFft};
use crate::{Error, Result};
use rand::Rng;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

const SNAPSHOT_MAGIC: &[u8; 8] = b"GFLOWFLD";
const SNAPSHOT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Boundary {
    Periodic,
    Dirichlet,
}

struct GridInner {
    dimension: usize,
    half_width: f64,
    points_per_axis: usize,
    boundary: Boundary,
    spacing: f64,
    /// |xi|^2 per flat index; populated on periodic grids only.
    freq_sq: Vec<f64>,
    fft: Option<NdFft>,
}

/// Shared handle to a grid. Cloning is cheap; equality of parameters (not
/// of handles) is what field operations check.
#[derive(Clone)]
pub struct Grid(Arc<GridInner>);

impl std::fmt::Debug for Grid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Grid")
            .field("dimension", &self.dimension())
            .field("half_width", &self.half_width())
            .field("points_per_axis", &self.points_per_axis())
            .field("boundary", &self.boundary())
            .finish()
    }
}

impl Grid {
    pub fn new(
        dimension: usize,
        half_width: f64,
        points_per_axis: usize,
        boundary: Boundary,
    ) -> Result<Grid> {
        if !(1..=3).contains(&dimension) {
            return Err(Error::Domain(format!(
                "dimension {dimension} unsupported, expected 1, 2 or 3"
            )));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::Domain(format!(
                "half_width must be positive and finite, got {half_width}"
            )));
        }
        if points_per_axis < 8 || points_per_axis % 2 != 0 {
            return Err(Error::Domain(format!(
                "points_per_axis must be even and at least 8, got {points_per_axis}"
            )));
        }
        if boundary == Boundary::Periodic && !points_per_axis.is_power_of_two() {
            return Err(Error::Domain(format!(
                "periodic grids need a power-of-two point count, got {points_per_axis}"
            )));
        }
        let spacing = 2.0 * half_width / points_per_axis as f64;
        let (freq_sq, fft) = match boundary {
            Boundary::Periodic => {
                let base = std::f64::consts::PI / half_width;
                let m = points_per_axis;
                let total = m.pow(dimension as u32);
                let mut freq_sq = vec![0.0; total];
                for (flat, slot) in freq_sq.iter_mut().enumerate() {
                    let mut rest = flat;
                    let mut sum = 0.0;
                    for _ in 0..dimension {
                        let k = rest % m;
                        rest /= m;
                        let f = base * freq_index(k, m) as f64;
                        sum += f * f;
                    }
                    *slot = sum;
                }
                (freq_sq, Some(NdFft::new(dimension, m)))
            }
            Boundary::Dirichlet => (Vec::new(), None),
        };
        Ok(Grid(Arc::new(GridInner {
            dimension,
            half_width,
            points_per_axis,
            boundary,
            spacing,
            freq_sq,
            fft,
        })))
    }

    pub fn dimension(&self) -> usize {
        self.0.dimension
    }

    pub fn half_width(&self) -> f64 {
        self.0.half_width
    }

    pub fn points_per_axis(&self) -> usize {
        self.0.points_per_axis
    }

    pub fn boundary(&self) -> Boundary {
        self.0.boundary
    }

    pub fn spacing(&self) -> f64 {
        self.0.spacing
    }

    pub fn len(&self) -> usize {
        self.0.points_per_axis.pow(self.0.dimension as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Quadrature weight of a single grid point, `h^N`.
    pub fn cell_volume(&self) -> f64 {
        self.0.spacing.powi(self.0.dimension as i32)
    }

    pub fn same_layout(&self, other: &Grid) -> bool {
        self.dimension() == other.dimension()
            && self.points_per_axis() == other.points_per_axis()
            && self.boundary() == other.boundary()
            && self.half_width() == other.half_width()
    }

    /// Axis coordinate of index `k`: `-L + k h`.
    pub fn coordinate(&self, k: usize) -> f64 {
        -self.0.half_width + k as f64 * self.0.spacing
    }

    /// Multi-index of a flat index, row-major (axis 0 slowest). Unused axes
    /// are zero.
    pub fn multi_index(&self, flat: usize) -> [usize; 3] {
        let m = self.0.points_per_axis;
        let mut idx = [0usize; 3];
        let mut rest = flat;
        for axis in (0..self.0.dimension).rev() {
            idx[axis] = rest % m;
            rest /= m;
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        let m = self.0.points_per_axis;
        let mut flat = 0;
        for axis in 0..self.0.dimension {
            flat = flat * m + idx[axis];
        }
        flat
    }

    /// Coordinates of a flat index; unused axes are zero.
    pub fn coords_of(&self, flat: usize) -> [f64; 3] {
        let idx = self.multi_index(flat);
        let mut out = [0.0; 3];
        for axis in 0..self.0.dimension {
            out[axis] = self.coordinate(idx[axis]);
        }
        out
    }

    pub fn radius_sq_of(&self, flat: usize) -> f64 {
        let c = self.coords_of(flat);
        c[..self.0.dimension].iter().map(|x| x * x).sum()
    }

    /// Nearest grid-aligned value to `r`, i.e. `round(r / h) * h`.
    pub fn snap(&self, r: f64) -> f64 {
        (r / self.0.spacing).round() * self.0.spacing
    }

    fn shift_steps(&self, shift: &[f64]) -> Result<Vec<i64>> {
        if shift.len() != self.0.dimension {
            return Err(Error::Domain(format!(
                "shift has {} entries for a {}-dimensional grid",
                shift.len(),
                self.0.dimension
            )));
        }
        shift
            .iter()
            .map(|&s| {
                let steps = s / self.0.spacing;
                let rounded = steps.round();
                if (steps - rounded).abs() > 1e-9 {
                    Err(Error::Domain(format!(
                        "shift {s} is not grid aligned (spacing {})",
                        self.0.spacing
                    )))
                } else {
                    Ok(rounded as i64)
                }
            })
            .collect()
    }
}

/// Real scalar field sampled on a [`Grid`].
#[derive(Clone)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl std::fmt::Debug for Field {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Field")
            .field("grid", &self.grid)
            .field("mass", &self.mass())
            .finish()
    }
}

impl Field {
    pub fn zeros(grid: &Grid) -> Field {
        Field {
            grid: grid.clone(),
            values: vec![0.0; grid.len()],
        }
    }

    pub fn from_values(grid: &Grid, values: Vec<f64>) -> Result<Field> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        Ok(Field {
            grid: grid.clone(),
            values,
        })
    }

    /// Samples `f(x)` at every grid point. The closure receives the
    /// coordinate array (unused axes zero).
    pub fn from_fn(grid: &Grid, f: impl Fn(&[f64]) -> f64) -> Field {
        let values = (0..grid.len())
            .map(|flat| {
                let c = grid.coords_of(flat);
                f(&c[..grid.dimension()])
            })
            .collect();
        Field {
            grid: grid.clone(),
            values,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn check_same_grid(&self, other: &Field) -> Result<()> {
        if self.grid.same_layout(&other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch(
                "fields live on different grids".into(),
            ))
        }
    }

    /// Rectangle-rule integral `h^N * sum(values)`.
    pub fn integrate(&self) -> f64 {
        self.grid.cell_volume() * self.values.iter().sum::<f64>()
    }

    /// `integral self * other`.
    pub fn inner(&self, other: &Field) -> Result<f64> {
        self.check_same_grid(other)?;
        let s: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum();
        Ok(self.grid.cell_volume() * s)
    }

    /// Squared L2 norm, `integral u^2`.
    pub fn mass(&self) -> f64 {
        let s: f64 = self.values.iter().map(|v| v * v).sum();
        self.grid.cell_volume() * s
    }

    pub fn norm_l2(&self) -> f64 {
        self.mass().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scale(&mut self, c: f64) {
        for v in &mut self.values {
            *v *= c;
        }
    }

    /// `self += c * other`.
    pub fn axpy(&mut self, c: f64, other: &Field) -> Result<()> {
        self.check_same_grid(other)?;
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += c * b;
        }
        Ok(())
    }

    /// Rescales so that `mass() == target` (no-op direction preserved).
    /// Errors on a zero field with a positive target.
    pub fn rescale_mass(&mut self, target: f64) -> Result<()> {
        if target == 0.0 {
            self.values.iter_mut().for_each(|v| *v = 0.0);
            return Ok(());
        }
        let m = self.mass();
        if m <= 0.0 || !m.is_finite() {
            return Err(Error::Domain(
                "cannot rescale a zero or non-finite field to positive mass".into(),
            ));
        }
        self.scale((target / m).sqrt());
        Ok(())
    }

    /// Negative Laplacian `-Δu`: exact in Fourier space on periodic grids,
    /// second-order centered differences with zero exterior values on
    /// Dirichlet grids.
    pub fn neg_laplacian(&self) -> Field {
        match self.grid.boundary() {
            Boundary::Periodic => {
                let inner = &self.grid.0;
                let fft = inner.fft.as_ref().expect("periodic grid has fft plans");
                let mut coeffs = fft.forward(&self.values);
                for (c, &fsq) in coeffs.iter_mut().zip(&inner.freq_sq) {
                    *c *= fsq;
                }
                Field {
                    grid: self.grid.clone(),
                    values: fft.inverse_real(coeffs),
                }
            }
            Boundary::Dirichlet => self.neg_laplacian_fd(),
        }
    }

    fn neg_laplacian_fd(&self) -> Field {
        let grid = &self.grid;
        let m = grid.points_per_axis();
        let h2 = grid.spacing() * grid.spacing();
        let n = grid.dimension();
        let mut out = vec![0.0; self.values.len()];
        for axis in 0..n {
            let stride = m.pow((n - 1 - axis) as u32);
            for flat in 0..self.values.len() {
                let k = flat / stride % m;
                let center = self.values[flat];
                let left = if k > 0 { self.values[flat - stride] } else { 0.0 };
                let right = if k + 1 < m { self.values[flat + stride] } else { 0.0 };
                out[flat] += (2.0 * center - left - right) / h2;
            }
        }
        Field {
            grid: grid.clone(),
            values: out,
        }
    }

    /// Kinetic term `integral |grad u|^2`, evaluated as `<u, -Δu>` so the
    /// same operator drives both the energy and the flow.
    pub fn grad_norm_sq(&self) -> f64 {
        self.inner(&self.neg_laplacian())
            .expect("laplacian preserves the grid")
    }

    /// Applies `(I + dt (-Δ))^{-1}`. Periodic grids divide coefficients by
    /// `1 + dt |xi|^2`; Dirichlet grids factor the operator per axis
    /// (`prod_d (I + dt A_d)`, each factor a constant-coefficient
    /// tridiagonal solve). The axis-split form differs from the unsplit
    /// inverse at O(dt^2) but stays symmetric positive definite, which is
    /// all the descent step needs.
    pub fn smoothed(&self, dt: f64) -> Field {
        assert!(dt >= 0.0, "smoothing time must be nonnegative");
        if dt == 0.0 {
            return self.clone();
        }
        match self.grid.boundary() {
            Boundary::Periodic => {
                let inner = &self.grid.0;
                let fft = inner.fft.as_ref().expect("periodic grid has fft plans");
                let mut coeffs = fft.forward(&self.values);
                for (c, &fsq) in coeffs.iter_mut().zip(&inner.freq_sq) {
                    *c /= 1.0 + dt * fsq;
                }
                Field {
                    grid: self.grid.clone(),
                    values: fft.inverse_real(coeffs),
                }
            }
            Boundary::Dirichlet => {
                let mut values = self.values.clone();
                let grid = &self.grid;
                let m = grid.points_per_axis();
                let n = grid.dimension();
                let c = dt / (grid.spacing() * grid.spacing());
                for axis in 0..n {
                    let stride = m.pow((n - 1 - axis) as u32);
                    solve_tridiagonal_lines(&mut values, m, stride, 1.0 + 2.0 * c, -c);
                }
                Field {
                    grid: grid.clone(),
                    values,
                }
            }
        }
    }

    /// Circular (periodic) or zero-filled (Dirichlet) translation by a
    /// grid-aligned shift vector.
    pub fn translate(&self, shift: &[f64]) -> Result<Field> {
        let steps = self.grid.shift_steps(shift)?;
        let m = self.grid.points_per_axis() as i64;
        let n = self.grid.dimension();
        let mut out = vec![0.0; self.values.len()];
        for flat in 0..self.values.len() {
            let idx = self.grid.multi_index(flat);
            let mut src = [0usize; 3];
            let mut inside = true;
            for axis in 0..n {
                let s = idx[axis] as i64 - steps[axis];
                match self.grid.boundary() {
                    Boundary::Periodic => src[axis] = s.rem_euclid(m) as usize,
                    Boundary::Dirichlet => {
                        if s < 0 || s >= m {
                            inside = false;
                            break;
                        }
                        src[axis] = s as usize;
                    }
                }
            }
            if inside {
                out[flat] = self.values[self.grid.flat_index(&src[..n])];
            }
        }
        Ok(Field {
            grid: self.grid.clone(),
            values: out,
        })
    }

    /// Mass-preserving dilation `x -> t^{N/2} u(t x)`. Periodic grids
    /// evaluate the trigonometric interpolant at the stretched points
    /// (Nyquist mode dropped); Dirichlet grids interpolate linearly.
    /// Either way the field is treated as zero outside the box, so a
    /// compression (`t > 1`) clips instead of dragging in periodic
    /// images; it also pushes frequency content toward the Nyquist
    /// limit, hence the logged diagnostic.
    pub fn dilate(&self, t: f64) -> Result<Field> {
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::Domain(format!("dilation factor must be positive, got {t}")));
        }
        if t > 1.0 + 1e-12 {
            log::warn!("dilate: factor {t} > 1 compresses features; watch for aliasing");
        }
        let n = self.grid.dimension();
        let amp = t.powf(n as f64 / 2.0);
        let values = match self.grid.boundary() {
            Boundary::Periodic => self.evaluate_scaled_spectral(t),
            Boundary::Dirichlet => self.evaluate_scaled_linear(t),
        };
        let mut field = Field {
            grid: self.grid.clone(),
            values,
        };
        field.scale(amp);
        Ok(field)
    }

    /// Axis-separable evaluation of the trig interpolant at `t * x_k`.
    fn evaluate_scaled_spectral(&self, t: f64) -> Vec<f64> {
        use rustfft::num_complex::Complex64;
        let grid = &self.grid;
        let inner = &grid.0;
        let fft = inner.fft.as_ref().expect("periodic grid has fft plans");
        let m = grid.points_per_axis();
        let n = grid.dimension();
        let base = std::f64::consts::PI / grid.half_width();
        // evaluation matrix E[j][k] = exp(i xi_k (t x_j + L)), shared by all
        // axes; the +L phase accounts for grid indices starting at -L
        let mut eval = vec![Complex64::new(0.0, 0.0); m * m];
        for j in 0..m {
            let arg = t * grid.coordinate(j);
            // the interpolant repeats with period 2L; a compression with
            // t > 1 would drag periodic images into the box, so clip to
            // zero outside the original domain instead
            if arg < -grid.half_width() || arg >= grid.half_width() {
                continue;
            }
            let y = arg + grid.half_width();
            for k in 0..m {
                let fi = freq_index(k, m);
                // drop the unpaired Nyquist mode; it cannot be evaluated
                // off-grid without an arbitrary phase convention
                if fi == (m / 2) as i64 {
                    continue;
                }
                let phase = base * fi as f64 * y;
                eval[j * m + k] = Complex64::new(phase.cos(), phase.sin());
            }
        }
        let mut buf = fft.forward(&self.values);
        let mut scratch = vec![Complex64::new(0.0, 0.0); m];
        for axis in 0..n {
            let stride = m.pow((n - 1 - axis) as u32);
            let lines = buf.len() / m;
            for l in 0..lines {
                let outer = l / stride;
                let base_idx = outer * stride * m + l % stride;
                for (j, slot) in scratch.iter_mut().enumerate() {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for k in 0..m {
                        acc += eval[j * m + k] * buf[base_idx + k * stride];
                    }
                    *slot = acc;
                }
                for j in 0..m {
                    buf[base_idx + j * stride] = scratch[j];
                }
            }
        }
        buf.into_iter().map(|c| c.re).collect()
    }

    fn evaluate_scaled_linear(&self, t: f64) -> Vec<f64> {
        let grid = &self.grid;
        let m = grid.points_per_axis();
        let n = grid.dimension();
        let h = grid.spacing();
        let l = grid.half_width();
        (0..grid.len())
            .map(|flat| {
                let idx = self.grid.multi_index(flat);
                // interpolate axis by axis via tensor weights
                let mut corners: Vec<(usize, f64)> = vec![(0, 1.0)];
                for axis in 0..n {
                    let y = t * grid.coordinate(idx[axis]);
                    let pos = (y + l) / h;
                    let k0 = pos.floor() as i64;
                    let w1 = pos - k0 as f64;
                    let mut next = Vec::with_capacity(corners.len() * 2);
                    for &(part, w) in &corners {
                        for (kk, ww) in [(k0, 1.0 - w1), (k0 + 1, w1)] {
                            if ww == 0.0 || kk < 0 || kk >= m as i64 {
                                continue;
                            }
                            next.push((part * m + kk as usize, w * ww));
                        }
                    }
                    corners = next;
                }
                corners
                    .iter()
                    .map(|&(flat_src, w)| w * self.values[flat_src])
                    .sum()
            })
            .collect()
    }

    /// Density barycenter `integral x u^2 / integral u^2` (zero for the
    /// zero field).
    pub fn barycenter(&self) -> [f64; 3] {
        let mut num = [0.0; 3];
        let mut den = 0.0;
        for (flat, &v) in self.values.iter().enumerate() {
            let w = v * v;
            if w == 0.0 {
                continue;
            }
            let c = self.grid.coords_of(flat);
            for axis in 0..self.grid.dimension() {
                num[axis] += w * c[axis];
            }
            den += w;
        }
        if den > 0.0 {
            for n in &mut num {
                *n /= den;
            }
        }
        num
    }

    /// Binary snapshot: fixed header (magic, version, N, M, boundary, L)
    /// followed by the raw values as little-endian f64 in row-major order.
    pub fn write_snapshot(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        f.write_all(SNAPSHOT_MAGIC)?;
        f.write_all(&SNAPSHOT_VERSION.to_le_bytes())?;
        f.write_all(&(self.grid.dimension() as u32).to_le_bytes())?;
        f.write_all(&(self.grid.points_per_axis() as u32).to_le_bytes())?;
        let b = match self.grid.boundary() {
            Boundary::Periodic => 0u32,
            Boundary::Dirichlet => 1u32,
        };
        f.write_all(&b.to_le_bytes())?;
        f.write_all(&self.grid.half_width().to_le_bytes())?;
        for v in &self.values {
            f.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_snapshot(path: &Path) -> Result<Field> {
        let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut magic = [0u8; 8];
        f.read_exact(&mut magic)?;
        if &magic != SNAPSHOT_MAGIC {
            return Err(Error::Config(format!(
                "{} is not a field snapshot (bad magic)",
                path.display()
            )));
        }
        let mut u32buf = [0u8; 4];
        f.read_exact(&mut u32buf)?;
        let version = u32::from_le_bytes(u32buf);
        if version != SNAPSHOT_VERSION {
            return Err(Error::Config(format!(
                "snapshot version {version} unsupported (expected {SNAPSHOT_VERSION})"
            )));
        }
        f.read_exact(&mut u32buf)?;
        let dimension = u32::from_le_bytes(u32buf) as usize;
        f.read_exact(&mut u32buf)?;
        let points = u32::from_le_bytes(u32buf) as usize;
        f.read_exact(&mut u32buf)?;
        let boundary = match u32::from_le_bytes(u32buf) {
            0 => Boundary::Periodic,
            1 => Boundary::Dirichlet,
            other => {
                return Err(Error::Config(format!("unknown boundary flag {other} in snapshot")))
            }
        };
        let mut f64buf = [0u8; 8];
        f.read_exact(&mut f64buf)?;
        let half_width = f64::from_le_bytes(f64buf);
        let grid = Grid::new(dimension, half_width, points, boundary)?;
        let mut values = Vec::with_capacity(grid.len());
        for _ in 0..grid.len() {
            f.read_exact(&mut f64buf)?;
            values.push(f64::from_le_bytes(f64buf));
        }
        Field::from_values(&grid, values)
    }
}

/// Batch Thomas solve of `(d, o, o)` constant-coefficient tridiagonal
/// systems along one axis of a row-major cube, in place.
fn solve_tridiagonal_lines(values: &mut [f64], m: usize, stride: usize, diag: f64, off: f64) {
    // forward-elimination coefficients are line-independent, compute once
    let mut cprime = vec![0.0; m];
    cprime[0] = off / diag;
    for k in 1..m {
        cprime[k] = off / (diag - off * cprime[k - 1]);
    }
    let lines = values.len() / m;
    let mut rhs = vec![0.0; m];
    for l in 0..lines {
        let outer = l / stride;
        let base = outer * stride * m + l % stride;
        for k in 0..m {
            rhs[k] = values[base + k * stride];
        }
        rhs[0] /= diag;
        for k in 1..m {
            rhs[k] = (rhs[k] - off * rhs[k - 1]) / (diag - off * cprime[k - 1]);
        }
        for k in (0..m - 1).rev() {
            rhs[k] -= cprime[k] * rhs[k + 1];
        }
        for k in 0..m {
            values[base + k * stride] = rhs[k];
        }
    }
}

/// Smooth nonnegative test field: a few gaussian bumps with randomized
/// centers, widths and heights. Centers stay in the middle half of the box
/// so tails clear the boundary.
pub fn random_bumps(grid: &Grid, rng: &mut impl Rng, bumps: usize) -> Field {
    let l = grid.half_width();
    let n = grid.dimension();
    let mut params = Vec::with_capacity(bumps);
    for _ in 0..bumps.max(1) {
        let mut center = [0.0; 3];
        for c in center.iter_mut().take(n) {
            *c = rng.gen_range(-0.25 * l..0.25 * l);
        }
        let width = rng.gen_range(0.06 * l..0.18 * l);
        let height = rng.gen_range(0.3..1.0);
        params.push((center, width, height));
    }
    Field::from_fn(grid, |x| {
        params
            .iter()
            .map(|(center, width, height)| {
                let r2: f64 = x
                    .iter()
                    .enumerate()
                    .map(|(d, xi)| (xi - center[d]) * (xi - center[d]))
                    .sum();
                height * (-r2 / (2.0 * width * width)).exp()
            })
            .sum()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn line_grid(m: usize, l: f64) -> Grid {
        Grid::new(1, l, m, Boundary::Periodic).unwrap()
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(Grid::new(4, 10.0, 64, Boundary::Periodic).is_err());
        assert!(Grid::new(1, 10.0, 63, Boundary::Dirichlet).is_err());
        assert!(Grid::new(1, 10.0, 96, Boundary::Periodic).is_err()); // not a power of two
        assert!(Grid::new(1, -1.0, 64, Boundary::Periodic).is_err());
        assert!(Grid::new(1, 10.0, 96, Boundary::Dirichlet).is_ok()); // even is enough for FD
    }

    #[test]
    fn gaussian_integral_matches_sqrt_pi() {
        let grid = line_grid(1024, 20.0);
        let u = Field::from_fn(&grid, |x| (-x[0] * x[0]).exp());
        assert_relative_eq!(u.integrate(), std::f64::consts::PI.sqrt(), epsilon = 1e-10);
    }

    #[test]
    fn soliton_mass_and_kinetic_terms() {
        // sqrt(2) sech(x): mass 4, integral |u'|^2 = 4/3
        let grid = line_grid(1024, 20.0);
        let u = Field::from_fn(&grid, |x| 2f64.sqrt() / x[0].cosh());
        assert_relative_eq!(u.mass(), 4.0, epsilon = 1e-8);
        assert_relative_eq!(u.grad_norm_sq(), 4.0 / 3.0, epsilon = 1e-6);
    }

    #[test]
    fn laplacian_eigenfunction_periodic() {
        let grid = line_grid(256, 10.0);
        let xi = std::f64::consts::PI / grid.half_width();
        let u = Field::from_fn(&grid, |x| (xi * x[0]).sin());
        let lap = u.neg_laplacian();
        for (a, b) in lap.values().iter().zip(u.values()) {
            assert_relative_eq!(*a, xi * xi * b, epsilon = 1e-10);
        }
    }

    #[test]
    fn laplacian_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for boundary in [Boundary::Periodic, Boundary::Dirichlet] {
            let grid = Grid::new(2, 8.0, 32, boundary).unwrap();
            let u = random_bumps(&grid, &mut rng, 3);
            let v = random_bumps(&grid, &mut rng, 3);
            let a = u.inner(&v.neg_laplacian()).unwrap();
            let b = v.inner(&u.neg_laplacian()).unwrap();
            assert_relative_eq!(a, b, epsilon = 1e-10, max_relative = 1e-10);
        }
    }

    #[test]
    fn kinetic_term_is_nonnegative_dirichlet() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let grid = Grid::new(1, 10.0, 128, Boundary::Dirichlet).unwrap();
        for _ in 0..20 {
            let u = random_bumps(&grid, &mut rng, 2);
            assert!(u.grad_norm_sq() >= 0.0);
        }
    }

    #[test]
    fn fd_laplacian_converges_at_second_order() {
        let exact = |x: f64| (-x * x).exp() * (4.0 * x * x - 2.0);
        let mut errs = Vec::new();
        for m in [256usize, 512] {
            let grid = Grid::new(1, 10.0, m, Boundary::Dirichlet).unwrap();
            let u = Field::from_fn(&grid, |x| (-x[0] * x[0]).exp());
            let lap = u.neg_laplacian_fd();
            let err = lap
                .values()
                .iter()
                .enumerate()
                .map(|(k, v)| (v + exact(grid.coordinate(k))).abs())
                .fold(0.0f64, f64::max);
            errs.push(err);
        }
        assert!(errs[0] / errs[1] > 3.0, "halving h should quarter the error: {errs:?}");
        assert!(errs[1] < 2e-3);
    }

    #[test]
    fn plancherel_identity_for_kinetic_term() {
        // <u, -lap u> computed pointwise must agree with the frequency-side sum
        let grid = line_grid(512, 12.0);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let u = random_bumps(&grid, &mut rng, 4);
        let direct = u.grad_norm_sq();
        let fft = NdFft::new(1, 512);
        let coeffs = fft.forward(u.values());
        let spectral: f64 = coeffs
            .iter()
            .zip(&grid.0.freq_sq)
            .map(|(c, &fsq)| fsq * c.norm_sqr())
            .sum::<f64>()
            * 2.0
            * grid.half_width();
        assert_relative_eq!(direct, spectral, max_relative = 1e-10);
    }

    #[test]
    fn translation_preserves_mass_and_wraps() {
        let grid = line_grid(128, 8.0);
        let u = Field::from_fn(&grid, |x| (-(x[0] - 6.0).powi(2)).exp());
        let shift = grid.snap(4.0);
        let moved = u.translate(&[shift]).unwrap();
        assert_relative_eq!(moved.mass(), u.mass(), max_relative = 1e-13);
        // bump started at +6, moved past the +8 edge, wraps around to -6
        let peak = moved
            .values()
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_relative_eq!(grid.coordinate(peak), -6.0, epsilon = grid.spacing());
    }

    #[test]
    fn translation_rejects_unaligned_shift() {
        let grid = line_grid(128, 8.0);
        let u = Field::zeros(&grid);
        assert!(u.translate(&[grid.spacing() * 0.5]).is_err());
    }

    #[test]
    fn dirichlet_translation_zero_fills() {
        let grid = Grid::new(1, 8.0, 128, Boundary::Dirichlet).unwrap();
        let u = Field::from_fn(&grid, |x| (-(x[0]).powi(2)).exp());
        let moved = u.translate(&[grid.snap(6.0)]).unwrap();
        assert!(moved.mass() < u.mass());
        assert_eq!(moved.values()[0], 0.0);
    }

    #[test]
    fn dilation_preserves_mass_and_scales_kinetic_term() {
        let grid = line_grid(1024, 20.0);
        let u = Field::from_fn(&grid, |x| (-x[0] * x[0]).exp());
        for t in [0.5, 2.0] {
            let v = u.dilate(t).unwrap();
            assert_relative_eq!(v.mass(), u.mass(), epsilon = 1e-6);
            assert_relative_eq!(v.grad_norm_sq(), t * t * u.grad_norm_sq(), max_relative = 1e-6);
        }
    }

    #[test]
    fn dilation_composes() {
        let grid = line_grid(512, 16.0);
        let u = Field::from_fn(&grid, |x| (-x[0] * x[0] / 2.0).exp());
        let a = u.dilate(1.5).unwrap().dilate(0.5).unwrap();
        let b = u.dilate(0.75).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() < 1e-6);
        }
    }

    #[test]
    fn smoothing_inverts_the_shifted_operator() {
        for boundary in [Boundary::Periodic, Boundary::Dirichlet] {
            let grid = Grid::new(1, 10.0, 256, boundary).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            let u = random_bumps(&grid, &mut rng, 3);
            let dt = 0.37;
            let s = u.smoothed(dt);
            // (I + dt(-lap)) s == u
            let mut back = s.neg_laplacian();
            back.scale(dt);
            back.axpy(1.0, &s).unwrap();
            for (a, b) in back.values().iter().zip(u.values()) {
                assert!((a - b).abs() < 1e-9, "boundary {boundary:?}");
            }
        }
    }

    #[test]
    fn snapshot_roundtrip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let grid = Grid::new(2, 6.0, 16, Boundary::Dirichlet).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let u = random_bumps(&grid, &mut rng, 2);
        let path = dir.path().join("u.field");
        u.write_snapshot(&path).unwrap();
        let v = Field::read_snapshot(&path).unwrap();
        assert!(u.grid().same_layout(v.grid()));
        assert_eq!(u.values(), v.values());
    }

    #[test]
    fn snapshot_rejects_corrupt_magic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk.field");
        std::fs::write(&path, b"NOTAFLDXXXXXXXXXXXXXXXXXXXXXXX").unwrap();
        assert!(matches!(Field::read_snapshot(&path), Err(Error::Config(_))));
    }

    #[test]
    fn barycenter_tracks_offset_bump() {
        let grid = line_grid(256, 10.0);
        let u = Field::from_fn(&grid, |x| (-(x[0] - 2.0).powi(2)).exp());
        assert_relative_eq!(u.barycenter()[0], 2.0, epsilon = 1e-6);
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(48))]

        // periodic translation permutes samples, so it is an exact isometry
        // and its inverse really inverts
        #[test]
        fn translate_is_an_exact_periodic_isometry(
            values in proptest::collection::vec(-5.0f64..5.0, 32),
            steps in -40i64..40,
        ) {
            let grid = Grid::new(1, 4.0, 32, Boundary::Periodic).unwrap();
            let u = Field::from_values(&grid, values).unwrap();
            let shift = steps as f64 * grid.spacing();
            let moved = u.translate(&[shift]).unwrap();
            // the sum order changes under the permutation, so mass only
            // agrees to roundoff; the max and the round-trip are exact
            proptest::prop_assert!((moved.mass() - u.mass()).abs() <= 1e-12 * (1.0 + u.mass()));
            proptest::prop_assert_eq!(moved.max_abs(), u.max_abs());
            let back = moved.translate(&[-shift]).unwrap();
            proptest::prop_assert_eq!(back.values(), u.values());
        }
    }
}

