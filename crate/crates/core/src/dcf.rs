//! Linear multi-channel discriminative correlation filter solved per frequency.
//!
//! Transforms are unnormalized forward and `1/(M·N)`-scaled inverse. A model
//! stores the numerators `A_d = ŷ ⊙ x̂_d*` and the shared real denominator
//! `B = Σ_i |x̂_i|²`; the per-channel filter spectrum is `W_d = A_d / (B + λ)`
//! and the response to a candidate `z` is `F⁻¹(Σ_d W_d ⊙ ẑ_d)`. With this
//! convention a candidate circularly shifted by `(r, c)` relative to the
//! training patch moves the response peak by `(r, c)`, and the response equals
//! the spatial circular cross-correlation `R(m) = Σ_d Σ_p w_d(p) z_d(p + m)`
//! with `w_d = F⁻¹(W_d*)`.

use std::cell::RefCell;
use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{invalid, Error, Result};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn fft_in_place(buf: &mut [Complex64], inverse: bool) {
    if buf.len() <= 1 {
        return;
    }
    let plan = PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(buf.len())
        } else {
            p.plan_fft_forward(buf.len())
        }
    });
    plan.process(buf);
}

fn transform2(buf: &mut [Complex64], rows: usize, cols: usize, inverse: bool) {
    debug_assert_eq!(buf.len(), rows * cols);
    if cols > 1 {
        for row in buf.chunks_exact_mut(cols) {
            fft_in_place(row, inverse);
        }
    }
    if rows > 1 {
        let mut column = vec![Complex64::new(0.0, 0.0); rows];
        for c in 0..cols {
            for r in 0..rows {
                column[r] = buf[r * cols + c];
            }
            fft_in_place(&mut column, inverse);
            for r in 0..rows {
                buf[r * cols + c] = column[r];
            }
        }
    }
}

/// Unnormalized 2-D DFT of a real row-major grid.
pub fn fft2(data: &[f64], rows: usize, cols: usize) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = data.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    transform2(&mut buf, rows, cols, false);
    buf
}

/// Inverse 2-D DFT scaled by `1/(rows·cols)`, keeping the real part.
pub fn ifft2_real(spectrum: &[Complex64], rows: usize, cols: usize) -> Vec<f64> {
    let mut buf = spectrum.to_vec();
    transform2(&mut buf, rows, cols, true);
    let scale = 1.0 / (rows * cols) as f64;
    buf.iter().map(|v| v.re * scale).collect()
}

/// Multi-channel real feature tensor, channel-major then row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStack {
    rows: usize,
    cols: usize,
    channels: usize,
    data: Vec<f64>,
}

impl FeatureStack {
    pub fn new(rows: usize, cols: usize, channels: Vec<Vec<f64>>) -> Result<Self> {
        let count = channels.len();
        let mut data = Vec::with_capacity(count * rows * cols);
        for (d, ch) in channels.into_iter().enumerate() {
            if ch.len() != rows * cols {
                return invalid(format!(
                    "channel {d} has {} values, expected {rows}x{cols}",
                    ch.len()
                ));
            }
            data.extend(ch);
        }
        Self::from_flat(rows, cols, count, data)
    }

    pub fn from_flat(rows: usize, cols: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || channels == 0 {
            return invalid(format!(
                "feature stack needs positive dimensions, got {channels}x{rows}x{cols}"
            ));
        }
        if data.len() != rows * cols * channels {
            return invalid(format!(
                "feature data has {} values, expected {}",
                data.len(),
                rows * cols * channels
            ));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return invalid("feature values must be finite");
        }
        Ok(FeatureStack {
            rows,
            cols,
            channels,
            data,
        })
    }

    pub fn zeros(rows: usize, cols: usize, channels: usize) -> Result<Self> {
        Self::from_flat(rows, cols, channels, vec![0.0; rows * cols * channels])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn channel_count(&self) -> usize {
        self.channels
    }

    pub fn channel(&self, d: usize) -> &[f64] {
        let n = self.rows * self.cols;
        &self.data[d * n..(d + 1) * n]
    }

    pub fn channel_mut(&mut self, d: usize) -> &mut [f64] {
        let n = self.rows * self.cols;
        &mut self.data[d * n..(d + 1) * n]
    }

    pub fn get(&self, d: usize, r: usize, c: usize) -> f64 {
        self.data[(d * self.rows + r) * self.cols + c]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Multiplies every channel elementwise by a `rows x cols` mask.
    pub fn masked(&self, mask: &[f64]) -> Result<FeatureStack> {
        if mask.len() != self.rows * self.cols {
            return invalid("mask size does not match feature grid");
        }
        let mut out = self.clone();
        for d in 0..self.channels {
            for (v, m) in out.channel_mut(d).iter_mut().zip(mask) {
                *v *= m;
            }
        }
        Ok(out)
    }

    /// Circular shift: output `(r, c)` takes input `(r - dr, c - dc)` modulo the grid.
    pub fn circular_shift(&self, dr: isize, dc: isize) -> FeatureStack {
        let (m, n) = (self.rows as isize, self.cols as isize);
        let mut out = self.clone();
        for d in 0..self.channels {
            let src = self.channel(d);
            let dst = out.channel_mut(d);
            for r in 0..m {
                for c in 0..n {
                    let sr = (r - dr).rem_euclid(m);
                    let sc = (c - dc).rem_euclid(n);
                    dst[(r * n + c) as usize] = src[(sr * n + sc) as usize];
                }
            }
        }
        out
    }

    fn spectra(&self) -> Vec<Vec<Complex64>> {
        (0..self.channels)
            .map(|d| fft2(self.channel(d), self.rows, self.cols))
            .collect()
    }
}

/// Hann window of length `len`; a single sample has weight 1.
pub fn hann(len: usize) -> Vec<f64> {
    if len <= 1 {
        return vec![1.0; len];
    }
    let denom = (len - 1) as f64;
    (0..len)
        .map(|k| 0.5 * (1.0 - (2.0 * PI * k as f64 / denom).cos()))
        .collect()
}

/// Multiplies each channel by the separable window `hann(rows) ⊗ hann(cols)`.
pub fn apply_hann(features: &FeatureStack) -> FeatureStack {
    let wr = hann(features.rows);
    let wc = hann(features.cols);
    let mut out = features.clone();
    for d in 0..out.channels {
        let ch = out.channel_mut(d);
        for (r, row) in ch.chunks_exact_mut(features.cols).enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v *= wr[r] * wc[c];
            }
        }
    }
    out
}

/// Regression target peaked at zero circular shift.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianLabel {
    rows: usize,
    cols: usize,
    sigma_factor: f64,
    grid: Vec<f64>,
    spectrum: Vec<Complex64>,
}

impl GaussianLabel {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn sigma_factor(&self) -> f64 {
        self.sigma_factor
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn spectrum(&self) -> &[Complex64] {
        &self.spectrum
    }
}

fn signed_wrap(k: usize, len: usize) -> f64 {
    if k <= len / 2 {
        k as f64
    } else {
        k as f64 - len as f64
    }
}

/// Gaussian label with `σ = sigma_factor · sqrt(target_h · target_w)`, with the
/// target size given in grid units.
pub fn make_gaussian_label(
    rows: usize,
    cols: usize,
    target_h: f64,
    target_w: f64,
    sigma_factor: f64,
) -> Result<GaussianLabel> {
    if rows == 0 || cols == 0 {
        return invalid(format!("label grid must be non-empty, got {rows}x{cols}"));
    }
    if !(sigma_factor > 0.0) || !(target_h > 0.0) || !(target_w > 0.0) {
        return invalid("sigma factor and target size must be positive");
    }
    let sigma = sigma_factor * (target_h * target_w).sqrt();
    let two_sigma_sq = 2.0 * sigma * sigma;
    let mut grid = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        let dr = signed_wrap(r, rows);
        for c in 0..cols {
            let dc = signed_wrap(c, cols);
            grid.push((-(dr * dr + dc * dc) / two_sigma_sq).exp());
        }
    }
    let spectrum = fft2(&grid, rows, cols);
    Ok(GaussianLabel {
        rows,
        cols,
        sigma_factor,
        grid,
        spectrum,
    })
}

/// Correlation scores over the grid of circular shifts.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseMap {
    rows: usize,
    cols: usize,
    grid: Vec<f64>,
    peak: (usize, usize),
    peak_value: f64,
}

impl ResponseMap {
    pub fn from_grid(rows: usize, cols: usize, grid: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || grid.len() != rows * cols {
            return invalid("response grid size does not match its dimensions");
        }
        let mut best = 0;
        for (i, &v) in grid.iter().enumerate() {
            // strict comparison keeps the first maximum in row-major order
            if v > grid[best] {
                best = i;
            }
        }
        Ok(ResponseMap {
            rows,
            cols,
            peak: (best / cols, best % cols),
            peak_value: grid[best],
            grid,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.grid[r * self.cols + c]
    }

    pub fn peak_position(&self) -> (usize, usize) {
        self.peak
    }

    pub fn peak_value(&self) -> f64 {
        self.peak_value
    }

    /// Signed peak shift `(rows, cols)` in grid units, refined to sub-bin
    /// precision by a parabola through the peak and its circular neighbours.
    pub fn displacement(&self) -> (f64, f64) {
        let (pr, pc) = self.peak;
        let (m, n) = (self.rows, self.cols);
        let center = self.peak_value;
        let mut dr = signed_wrap(pr, m);
        let mut dc = signed_wrap(pc, n);
        if m >= 3 {
            let up = self.at((pr + m - 1) % m, pc);
            let down = self.at((pr + 1) % m, pc);
            dr += parabolic_offset(up, center, down);
        }
        if n >= 3 {
            let left = self.at(pr, (pc + n - 1) % n);
            let right = self.at(pr, (pc + 1) % n);
            dc += parabolic_offset(left, center, right);
        }
        (dr, dc)
    }
}

fn parabolic_offset(before: f64, center: f64, after: f64) -> f64 {
    let curvature = before - 2.0 * center + after;
    if curvature < 0.0 {
        (0.5 * (before - after) / curvature).clamp(-0.5, 0.5)
    } else {
        0.0
    }
}

/// Per-channel numerators and the shared denominator of a trained filter.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterModel {
    rows: usize,
    cols: usize,
    lambda: f64,
    numerators: Vec<Vec<Complex64>>,
    denominator: Vec<f64>,
}

fn check_label(features: &FeatureStack, label: &GaussianLabel) -> Result<()> {
    if features.rows != label.rows || features.cols != label.cols {
        return invalid(format!(
            "features are {}x{} but label is {}x{}",
            features.rows, features.cols, label.rows, label.cols
        ));
    }
    Ok(())
}

/// Transforms of one training frame: `ŷ ⊙ x̂_d*` per channel and `Σ_i |x̂_i|²`.
///
/// Computing these once lets any number of models train or update on the same frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameTerms {
    rows: usize,
    cols: usize,
    numerators: Vec<Vec<Complex64>>,
    energy: Vec<f64>,
}

impl FrameTerms {
    pub fn new(features: &FeatureStack, label: &GaussianLabel) -> Result<Self> {
        check_label(features, label)?;
        let spectra = features.spectra();
        let mut energy = vec![0.0; features.rows * features.cols];
        let numerators = spectra
            .iter()
            .map(|xf| {
                for (e, x) in energy.iter_mut().zip(xf) {
                    *e += x.norm_sqr();
                }
                label
                    .spectrum
                    .iter()
                    .zip(xf)
                    .map(|(y, x)| y * x.conj())
                    .collect()
            })
            .collect();
        Ok(FrameTerms {
            rows: features.rows,
            cols: features.cols,
            numerators,
            energy,
        })
    }

    pub fn channel_count(&self) -> usize {
        self.numerators.len()
    }

    /// Model trained on this frame alone.
    pub fn to_model(&self, lambda: f64) -> Result<FilterModel> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return invalid(format!("lambda must be finite and >= 0, got {lambda}"));
        }
        Ok(FilterModel {
            rows: self.rows,
            cols: self.cols,
            lambda,
            numerators: self.numerators.clone(),
            denominator: self.energy.clone(),
        })
    }
}

/// Closed-form ridge solution on one frame.
pub fn train_filter(
    features: &FeatureStack,
    label: &GaussianLabel,
    lambda: f64,
) -> Result<FilterModel> {
    FrameTerms::new(features, label)?.to_model(lambda)
}

/// Exponential moving average of numerator and denominator with rate `eta`.
pub fn update_model(
    model: &FilterModel,
    features: &FeatureStack,
    label: &GaussianLabel,
    eta: f64,
) -> Result<FilterModel> {
    let mut next = model.clone();
    next.update(features, label, eta)?;
    Ok(next)
}

/// Response of `candidate` under `model`.
pub fn respond(model: &FilterModel, candidate: &FeatureStack) -> Result<ResponseMap> {
    model.respond(candidate)
}

impl FilterModel {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn channel_count(&self) -> usize {
        self.numerators.len()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn numerator(&self, d: usize) -> &[Complex64] {
        &self.numerators[d]
    }

    pub fn denominator(&self) -> &[f64] {
        &self.denominator
    }

    /// `W_d = A_d / (B + λ)`; bins where the regularized energy vanishes are zero.
    pub fn filter_spectra(&self) -> Vec<Vec<Complex64>> {
        self.numerators
            .iter()
            .map(|a| {
                a.iter()
                    .zip(&self.denominator)
                    .map(|(a, b)| {
                        let den = b + self.lambda;
                        if den > 0.0 {
                            a / den
                        } else {
                            Complex64::new(0.0, 0.0)
                        }
                    })
                    .collect()
            })
            .collect()
    }

    pub fn update(
        &mut self,
        features: &FeatureStack,
        label: &GaussianLabel,
        eta: f64,
    ) -> Result<()> {
        if !(eta > 0.0 && eta <= 1.0) {
            return invalid(format!("learning rate must lie in (0, 1], got {eta}"));
        }
        self.update_with(&FrameTerms::new(features, label)?, eta)
    }

    /// `A_d ← (1-η)A_d + η ŷ⊙x̂_d*`, `B ← (1-η)B + η Σ_i |x̂_i|²`.
    pub fn update_with(&mut self, terms: &FrameTerms, eta: f64) -> Result<()> {
        if !(eta > 0.0 && eta <= 1.0) {
            return invalid(format!("learning rate must lie in (0, 1], got {eta}"));
        }
        if terms.rows != self.rows
            || terms.cols != self.cols
            || terms.numerators.len() != self.numerators.len()
        {
            return invalid("update frame does not match the model dimensions");
        }
        let keep = 1.0 - eta;
        for (a, fresh) in self.numerators.iter_mut().zip(&terms.numerators) {
            for (v, f) in a.iter_mut().zip(fresh) {
                *v = *v * keep + f * eta;
            }
        }
        for (b, e) in self.denominator.iter_mut().zip(&terms.energy) {
            *b = *b * keep + e * eta;
        }
        Ok(())
    }

    pub fn respond(&self, candidate: &FeatureStack) -> Result<ResponseMap> {
        if candidate.rows != self.rows
            || candidate.cols != self.cols
            || candidate.channels != self.numerators.len()
        {
            return invalid(format!(
                "candidate is {}x{}x{} but model is {}x{}x{}",
                candidate.channels,
                candidate.rows,
                candidate.cols,
                self.numerators.len(),
                self.rows,
                self.cols
            ));
        }
        let n = self.rows * self.cols;
        let mut acc = vec![Complex64::new(0.0, 0.0); n];
        for (d, w) in self.filter_spectra().iter().enumerate() {
            let zf = fft2(candidate.channel(d), self.rows, self.cols);
            for ((s, w), z) in acc.iter_mut().zip(w).zip(&zf) {
                *s += w * z;
            }
        }
        let grid = ifft2_real(&acc, self.rows, self.cols);
        if grid.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invariant("non-finite correlation response".into()));
        }
        ResponseMap::from_grid(self.rows, self.cols, grid)
    }

    /// Spatial filters `w_d = F⁻¹(W_d*)`, one real grid per channel.
    pub fn spatial_filters(&self) -> Vec<Vec<f64>> {
        self.filter_spectra()
            .iter()
            .map(|w| {
                let conj: Vec<Complex64> = w.iter().map(|v| v.conj()).collect();
                ifft2_real(&conj, self.rows, self.cols)
            })
            .collect()
    }
}
