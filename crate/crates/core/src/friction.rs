//! Friction-tensor estimation: the exact lag-summed feature autocovariance
//! under the policy-induced chain, an FFT-based empirical estimator for
//! sampled series, and the log-trace scalar reduction used for maps.

use ndarray::{Array1, Array2};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::linalg::sym_eigen;
use crate::mdp::TabularMdp;
use crate::solver::{policy_chain, SoftSolution, StationaryDist};

/// Fixed-point slack accepted when validating a stationary distribution
/// against the chain it is claimed to be stationary for.
pub const STATIONARITY_TOL: f64 = 1e-6;

/// Floor applied to traces before taking logs in scalar maps.
pub const TRACE_FLOOR: f64 = 1e-12;

/// Symmetric PSD lag-summed autocovariance matrix of the conjugate forces.
///
/// Truncated lag sums can pick up small negative eigenvalues; construction
/// symmetrizes, then clamps negative eigenvalues to zero and records the
/// clamped mass as a diagnostic.
#[derive(Debug, Clone, PartialEq)]
pub struct FrictionTensor {
    zeta: Array2<f64>,
    raw: Array2<f64>,
    truncation_lag: usize,
    beta_prefactor: f64,
    clamped_mass: f64,
}

impl FrictionTensor {
    pub(crate) fn from_lag_sum(sum: Array2<f64>, truncation_lag: usize, beta: f64) -> Self {
        let l = sum.nrows();
        let mut raw = Array2::zeros((l, l));
        for i in 0..l {
            for j in 0..l {
                raw[[i, j]] = 0.5 * (sum[[i, j]] + sum[[j, i]]);
            }
        }
        let (w, v) = sym_eigen(&raw);
        let mut clamped_mass = 0.0;
        let mut zeta = Array2::zeros((l, l));
        for k in 0..l {
            let lam = if w[k] < 0.0 {
                clamped_mass += -w[k];
                0.0
            } else {
                w[k]
            };
            if lam == 0.0 {
                continue;
            }
            for i in 0..l {
                for j in 0..l {
                    zeta[[i, j]] += lam * v[[i, k]] * v[[j, k]];
                }
            }
        }
        Self {
            zeta,
            raw,
            truncation_lag,
            beta_prefactor: beta,
            clamped_mass,
        }
    }

    /// The PSD tensor.
    pub fn zeta(&self) -> &Array2<f64> {
        &self.zeta
    }

    /// Symmetrized lag sum before eigenvalue clamping.
    pub fn raw(&self) -> &Array2<f64> {
        &self.raw
    }

    pub fn dim(&self) -> usize {
        self.zeta.nrows()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.zeta[[i, i]]).sum()
    }

    /// Scalar value for 1x1 tensors.
    pub fn scalar(&self) -> f64 {
        debug_assert_eq!(self.dim(), 1);
        self.zeta[[0, 0]]
    }

    pub fn truncation_lag(&self) -> usize {
        self.truncation_lag
    }

    pub fn beta_prefactor(&self) -> f64 {
        self.beta_prefactor
    }

    /// Total negative eigenvalue mass removed by the PSD clamp.
    pub fn clamped_mass(&self) -> f64 {
        self.clamped_mass
    }

    pub fn min_raw_eigenvalue(&self) -> f64 {
        sym_eigen(&self.raw).0[0]
    }

    pub fn determinant(&self) -> f64 {
        sym_eigen(&self.zeta).0.iter().product()
    }
}

/// Exact friction tensor under the policy-induced chain:
/// `zeta_ij = beta * sum_{t=0..T} E[ dphi_i(x_t) dphi_j(x_0) ]` with
/// `x_0 ~ rho` and `dphi` the rho-centered features. The rho-weighted
/// centered features are propagated through powers of the chain matrix,
/// and the result is symmetrized.
pub fn friction_exact(
    mdp: &TabularMdp,
    solution: &SoftSolution,
    dist: &StationaryDist,
    max_lag: usize,
    beta: f64,
) -> Result<FrictionTensor> {
    let n = mdp.n_pairs();
    if dist.rho.len() != n {
        return Err(Error::Dimension(format!(
            "stationary distribution has {} entries, chain has {n}",
            dist.rho.len()
        )));
    }
    let chain = policy_chain(mdp, &solution.policy)?;
    let forward = dist.rho.dot(&chain);
    let tv = 0.5
        * forward
            .iter()
            .zip(dist.rho.iter())
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>();
    if tv > STATIONARITY_TOL {
        return Err(Error::Domain(format!(
            "distribution is not stationary for the policy chain (TV residual {tv:.3e})"
        )));
    }

    let l = mdp.feature_dim();
    let mean = dist.rho.dot(mdp.features());
    let mut centered = mdp.features().clone();
    for mut row in centered.rows_mut() {
        row.zip_mut_with(&mean, |x, &m| *x -= m);
    }
    // weighted[x, j] = rho(x) * dphi_j(x)
    let mut weighted = centered.clone();
    for (x, mut row) in weighted.rows_mut().into_iter().enumerate() {
        row.mapv_inplace(|v| v * dist.rho[x]);
    }

    let mut sum = Array2::<f64>::zeros((l, l));
    let mut propagated = centered; // M^t dphi, columns propagated in place
    for t in 0..=max_lag {
        // term[i][j] = sum_x (M^t dphi_i)(x) rho(x) dphi_j(x)
        sum += &propagated.t().dot(&weighted);
        if t < max_lag {
            propagated = chain.dot(&propagated);
        }
    }
    sum.mapv_inplace(|v| v * beta);
    Ok(FrictionTensor::from_lag_sum(sum, max_lag, beta))
}

/// Empirical friction from a sampled series of feature vectors, shape
/// `(N, L)`. Columns are centered by their empirical mean, autocovariances
/// `c(t) = (1/N) sum_k dx_{k+t} dx_k^T` are computed for `t = 0..=max_lag`
/// by FFT cross-correlation, and their sum is returned.
pub fn friction_sampled(series: &Array2<f64>, max_lag: usize) -> Result<FrictionTensor> {
    let (n, l) = series.dim();
    if n == 0 || l == 0 {
        return Err(Error::Domain("empty series".into()));
    }
    if n <= max_lag {
        return Err(Error::Domain(format!(
            "series length {n} must exceed max lag {max_lag}"
        )));
    }
    let mut centered = series.clone();
    for j in 0..l {
        let mean = centered.column(j).mean().unwrap();
        centered.column_mut(j).mapv_inplace(|x| x - mean);
    }

    // zero-pad past n + max_lag so circular correlation is linear on 0..=max_lag
    let size = (n + max_lag + 1).next_power_of_two();
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(size);
    let ifft = planner.plan_fft_inverse(size);

    let mut spectra = Vec::with_capacity(l);
    for j in 0..l {
        let mut buf = vec![Complex::new(0.0, 0.0); size];
        for (k, &x) in centered.column(j).iter().enumerate() {
            buf[k] = Complex::new(x, 0.0);
        }
        fft.process(&mut buf);
        spectra.push(buf);
    }

    let mut sum = Array2::<f64>::zeros((l, l));
    let norm = 1.0 / (size as f64 * n as f64);
    for i in 0..l {
        for j in 0..l {
            let mut cross: Vec<Complex<f64>> = spectra[i]
                .iter()
                .zip(spectra[j].iter())
                .map(|(a, b)| a * b.conj())
                .collect();
            ifft.process(&mut cross);
            // cross[t] = sum_k x_{k+t, i} x_{k, j} for t = 0..=max_lag
            let mut s = 0.0;
            for item in cross.iter().take(max_lag + 1) {
                s += item.re;
            }
            sum[[i, j]] = s * norm;
        }
    }
    Ok(FrictionTensor::from_lag_sum(sum, max_lag, 1.0))
}

/// Scalar-series convenience wrapper around [`friction_sampled`].
pub fn friction_sampled_scalar(series: &[f64], max_lag: usize) -> Result<FrictionTensor> {
    let arr = Array2::from_shape_vec((series.len(), 1), series.to_vec())
        .map_err(|e| Error::Dimension(e.to_string()))?;
    friction_sampled(&arr, max_lag)
}

/// Log-trace scalar reduction of a tensor field laid out on a regular grid,
/// with optional Gaussian smoothing. `shape` gives nodes per axis (row-major
/// flat layout), `spacings` the per-axis node spacing in lambda units, and
/// `sigma` the filter width in lambda units (0 disables smoothing).
/// Returns `(raw, smoothed)` log-trace values; traces are floored at
/// [`TRACE_FLOOR`] before the log.
pub fn scalar_field(
    tensors: &[FrictionTensor],
    shape: &[usize],
    spacings: &[f64],
    sigma: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let total: usize = shape.iter().product();
    if tensors.len() != total {
        return Err(Error::Dimension(format!(
            "{} tensors for a grid of {total} nodes",
            tensors.len()
        )));
    }
    if shape.len() != spacings.len() {
        return Err(Error::Dimension("shape/spacings length mismatch".into()));
    }
    let raw: Vec<f64> = tensors
        .iter()
        .map(|t| t.trace().max(TRACE_FLOOR).ln())
        .collect();
    let mut smoothed = raw.clone();
    if sigma > 0.0 {
        for (axis, (&n, &dx)) in shape.iter().zip(spacings.iter()).enumerate() {
            if n < 2 {
                continue;
            }
            let sigma_cells = sigma / dx;
            smoothed = smooth_axis(&smoothed, shape, axis, sigma_cells);
        }
    }
    Ok((raw, smoothed))
}

/// One separable Gaussian pass along `axis` with reflective boundaries.
fn smooth_axis(values: &[f64], shape: &[usize], axis: usize, sigma_cells: f64) -> Vec<f64> {
    let n = shape[axis];
    let radius = ((3.0 * sigma_cells).ceil() as usize).max(1);
    let mut kernel = Vec::with_capacity(2 * radius + 1);
    for k in -(radius as i64)..=(radius as i64) {
        kernel.push((-0.5 * (k as f64 / sigma_cells).powi(2)).exp());
    }
    let total: f64 = kernel.iter().sum();
    for w in &mut kernel {
        *w /= total;
    }

    // stride of the axis in the row-major flat layout
    let stride: usize = shape[axis + 1..].iter().product();
    let lines: usize = values.len() / n;
    let mut out = vec![0.0; values.len()];
    for line in 0..lines {
        // decompose line index into (outer, inner) around the axis
        let outer = line / stride;
        let inner = line % stride;
        let base = outer * n * stride + inner;
        for i in 0..n {
            let mut acc = 0.0;
            for (ki, w) in kernel.iter().enumerate() {
                let j = reflect(i as i64 + ki as i64 - radius as i64, n);
                acc += w * values[base + j * stride];
            }
            out[base + i * stride] = acc;
        }
    }
    out
}

/// Mirror an index into `[0, n)` without repeating the edge sample.
fn reflect(mut i: i64, n: usize) -> usize {
    let n = n as i64;
    if n == 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    i = i.rem_euclid(period);
    if i >= n {
        i = period - i;
    }
    i as usize
}

/// Exact autocovariance-sum expectation for the centered features of a
/// stationary chain, by explicit matrix powers. Test oracle quality: O(T n^2 L).
pub fn lag_sum_by_matrix_powers(
    chain: &Array2<f64>,
    rho: &Array1<f64>,
    features: &Array2<f64>,
    max_lag: usize,
) -> Array2<f64> {
    let l = features.ncols();
    let mean = rho.dot(features);
    let mut centered = features.clone();
    for mut row in centered.rows_mut() {
        row.zip_mut_with(&mean, |x, &m| *x -= m);
    }
    let n = chain.nrows();
    let mut power = Array2::eye(n);
    let mut sum = Array2::zeros((l, l));
    for _t in 0..=max_lag {
        for i in 0..l {
            for j in 0..l {
                let mut term = 0.0;
                for x in 0..n {
                    let mut prop = 0.0;
                    for y in 0..n {
                        prop += power[[x, y]] * centered[[y, i]];
                    }
                    term += rho[x] * centered[[x, j]] * prop;
                }
                sum[[i, j]] += term;
            }
        }
        power = power.dot(chain);
    }
    sum
}
