//! Schmidt decomposition of a joint spectral amplitude and the high-gain
//! reweighting of its mode occupations.

use std::io::Write;

use faer::{c64, Mat, Side};

use crate::config::FrequencyGrid;
use crate::error::{Error, Result};
use crate::jsa::JointSpectralAmplitude;
use crate::observables::Spectrum;

/// Relative spacing below which neighbouring Schmidt weights are treated as
/// one degenerate cluster.
const DEGENERACY_RTOL: f64 = 1e-9;

/// Fraction of a mode's peak magnitude used to pick its phase-reference sample.
const PHASE_REFERENCE_FRACTION: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arm {
    Signal,
    Idler,
}

/// `F(ω_s, ω_i) = Σ_k √λ_k u_k(ω_s) v_k(ω_i)`, modes normalized so that
/// `Σ_ω |u_k(ω)|² Δω = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SchmidtDecomposition {
    grid: FrequencyGrid,
    weights: Vec<f64>,
    signal_modes: Vec<Vec<c64>>,
    idler_modes: Vec<Vec<c64>>,
    discarded_mass: f64,
    jsa_norm: f64,
}

impl SchmidtDecomposition {
    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    /// Retained `λ_k`, descending.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn truncation_rank(&self) -> usize {
        self.weights.len()
    }

    pub fn signal_modes(&self) -> &[Vec<c64>] {
        &self.signal_modes
    }

    pub fn idler_modes(&self) -> &[Vec<c64>] {
        &self.idler_modes
    }

    pub fn modes(&self, side: Arm) -> &[Vec<c64>] {
        match side {
            Arm::Signal => &self.signal_modes,
            Arm::Idler => &self.idler_modes,
        }
    }

    /// Weight of the modes dropped below the rank tolerance.
    pub fn discarded_mass(&self) -> f64 {
        self.discarded_mass
    }

    /// Frobenius norm of the JSA before normalization.
    pub fn jsa_norm(&self) -> f64 {
        self.jsa_norm
    }

    /// Singular values of the unnormalized JSA, `√λ_k·‖F‖`.
    pub fn raw_singular_values(&self) -> Vec<f64> {
        self.weights.iter().map(|l| l.sqrt() * self.jsa_norm).collect()
    }

    /// Low-gain Schmidt number `1/Σλ_k²`.
    pub fn schmidt_number(&self) -> f64 {
        1.0 / self.weights.iter().map(|l| l * l).sum::<f64>()
    }

    /// Discrete matrix `Σ_k √λ_k u_k(ω_i) v_k(ω_j) Δω` over the retained modes.
    pub fn reconstruct(&self) -> Vec<c64> {
        let n = self.grid.n_points();
        let dw = self.grid.step();
        let mut out = vec![c64::new(0.0, 0.0); n * n];
        for (k, l) in self.weights.iter().enumerate() {
            let a = l.sqrt() * dw;
            let (u, v) = (&self.signal_modes[k], &self.idler_modes[k]);
            for i in 0..n {
                let ui = u[i] * a;
                for j in 0..n {
                    out[i * n + j] += ui * v[j];
                }
            }
        }
        out
    }

    /// Per-mode CSV: `omega,re,im` for mode `k` on `side`.
    pub fn write_mode_csv<W: Write>(&self, side: Arm, k: usize, mut out: W) -> Result<()> {
        let mode = self
            .modes(side)
            .get(k)
            .ok_or_else(|| Error::Numerical(format!("mode {k} not retained")))?;
        writeln!(out, "# side = {}", side_name(side))?;
        writeln!(out, "# mode = {k}")?;
        writeln!(out, "# lambda = {:e}", self.weights[k])?;
        writeln!(out, "omega_rad_per_s,re,im")?;
        for (i, v) in mode.iter().enumerate() {
            writeln!(out, "{:e},{:e},{:e}", self.grid.omega(i), v.re, v.im)?;
        }
        Ok(())
    }
}

fn side_name(side: Arm) -> &'static str {
    match side {
        Arm::Signal => "signal",
        Arm::Idler => "idler",
    }
}

/// Dense SVD of the JSA. Weights below `rank_tolerance` are dropped and their
/// total recorded as the discarded mass.
///
/// Each signal mode's first sample above a small fraction of its peak is made
/// real and positive (the idler mode takes the conjugate phase). Degenerate
/// weights are resolved into modes that are even, then odd, under the
/// reflection `ω₀+Ω ↔ ω₀−Ω`.
pub fn schmidt_decompose(jsa: &JointSpectralAmplitude, rank_tolerance: f64) -> Result<SchmidtDecomposition> {
    if !(0.0..1.0).contains(&rank_tolerance) {
        return Err(Error::field("run.rank_tolerance", "must lie in [0, 1)"));
    }
    let n = jsa.n();
    let values = jsa.values();
    let m = Mat::<c64>::from_fn(n, n, |i, j| values[i * n + j]);
    let svd = m.svd().map_err(|_| Error::SvdFailed {
        rows: n,
        cols: n,
        norm: jsa.norm(),
    })?;
    let s = svd.S().column_vector();
    let sing: Vec<f64> = (0..n).map(|k| s[k].re).collect();
    if sing.iter().any(|x| !x.is_finite()) {
        return Err(Error::SvdFailed {
            rows: n,
            cols: n,
            norm: jsa.norm(),
        });
    }
    let total: f64 = sing.iter().map(|x| x * x).sum();
    let lambda: Vec<f64> = sing.iter().map(|x| x * x / total).collect();
    let rank = lambda.iter().take_while(|&&l| l >= rank_tolerance).count().max(1);
    let discarded_mass: f64 = lambda[rank..].iter().sum();

    // work on column copies: u_k = U[:,k], w_k = conj(V[:,k]) so F = Σ s u wᵀ
    let (uu, vv) = (svd.U(), svd.V());
    let mut us: Vec<Vec<c64>> = (0..rank).map(|k| (0..n).map(|i| uu[(i, k)]).collect()).collect();
    let mut ws: Vec<Vec<c64>> = (0..rank).map(|k| (0..n).map(|i| vv[(i, k)].conj()).collect()).collect();

    let mut start = 0;
    while start < rank {
        let mut end = start + 1;
        while end < rank && (lambda[end - 1] - lambda[end]) <= DEGENERACY_RTOL * lambda[start] {
            end += 1;
        }
        if end - start > 1 {
            resolve_cluster(&mut us[start..end], &mut ws[start..end])?;
        }
        start = end;
    }

    let scale = 1.0 / jsa.grid().step().sqrt();
    for (u, w) in us.iter_mut().zip(ws.iter_mut()) {
        fix_phase(u, w);
        for x in u.iter_mut().chain(w.iter_mut()) {
            *x *= scale;
        }
    }

    Ok(SchmidtDecomposition {
        grid: *jsa.grid(),
        weights: lambda[..rank].to_vec(),
        signal_modes: us,
        idler_modes: ws,
        discarded_mass,
        jsa_norm: jsa.norm(),
    })
}

fn fix_phase(u: &mut [c64], w: &mut [c64]) {
    let peak = u.iter().map(|x| x.norm()).fold(0.0, f64::max);
    if peak == 0.0 {
        return;
    }
    let Some(r) = u.iter().find(|x| x.norm() >= PHASE_REFERENCE_FRACTION * peak) else {
        return;
    };
    let rot = r.conj() / r.norm();
    for x in u.iter_mut() {
        *x *= rot;
    }
    let back = rot.conj();
    for x in w.iter_mut() {
        *x *= back;
    }
}

/// Rotate a degenerate cluster into eigenvectors of the frequency reflection,
/// even modes first.
fn resolve_cluster(us: &mut [Vec<c64>], ws: &mut [Vec<c64>]) -> Result<()> {
    let m = us.len();
    let n = us[0].len();
    let r = Mat::<c64>::from_fn(m, m, |a, b| {
        (0..n).map(|i| us[a][i].conj() * us[b][n - 1 - i]).sum::<c64>()
    });
    // symmetrize against rounding
    let h = Mat::<c64>::from_fn(m, m, |a, b| (r[(a, b)] + r[(b, a)].conj()) * 0.5);
    let eig = h
        .self_adjoint_eigen(Side::Lower)
        .map_err(|_| Error::Numerical("eigendecomposition of a degenerate Schmidt cluster failed".into()))?;
    let q = eig.U();
    // eigenvalues ascend; take them in reverse so even (+1) modes come first
    let new_u: Vec<Vec<c64>> = (0..m)
        .rev()
        .map(|c| (0..n).map(|i| (0..m).map(|a| us[a][i] * q[(a, c)]).sum()).collect())
        .collect();
    let new_w: Vec<Vec<c64>> = (0..m)
        .rev()
        .map(|c| (0..n).map(|i| (0..m).map(|a| ws[a][i] * q[(a, c)].conj()).sum()).collect())
        .collect();
    us.clone_from_slice(&new_u);
    ws.clone_from_slice(&new_w);
    Ok(())
}

/// Output of the high-gain reweighting.
#[derive(Debug, Clone, PartialEq)]
pub struct HighGainWeights {
    /// `λ̃_k`, in the order of the input weights.
    pub lambda_tilde: Vec<f64>,
    /// `Σ_k sinh²(x_k)`; infinite if it overflows.
    pub total_photon_scale: f64,
    /// `ln Σ_k sinh²(x_k)`, finite even when the total overflows.
    pub log_total_photon_scale: f64,
}

impl HighGainWeights {
    /// Mean photon number per effective mode, `N/K`.
    pub fn photons_per_mode(&self) -> f64 {
        self.log_photons_per_mode().exp()
    }

    fn log_photons_per_mode(&self) -> f64 {
        self.log_total_photon_scale + self.lambda_tilde.iter().map(|l| l * l).sum::<f64>().ln()
    }
}

/// `ln sinh²(x)` for `x > 0`, log-domain above `x = 20`.
fn ln_sinh_sq(x: f64) -> f64 {
    if x > 20.0 {
        2.0 * (x - std::f64::consts::LN_2 + (-(-2.0 * x).exp()).ln_1p())
    } else {
        2.0 * x.sinh().ln()
    }
}

/// Occupations `sinh²(x_k)` normalized to one, for arbitrary squeezing
/// amplitudes `x_k ≥ 0`.
pub fn reweight_amplitudes(x: &[f64]) -> Result<HighGainWeights> {
    if x.is_empty() {
        return Err(Error::Numerical("no modes to reweight".into()));
    }
    if x.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::Numerical("squeezing amplitudes must be finite and non-negative".into()));
    }
    let logs: Vec<f64> = x
        .iter()
        .map(|&v| if v > 0.0 { ln_sinh_sq(v) } else { f64::NEG_INFINITY })
        .collect();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return Err(Error::Numerical("all squeezing amplitudes are zero".into()));
    }
    let rel: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
    let sum: f64 = rel.iter().sum();
    let log_total = top + sum.ln();
    Ok(HighGainWeights {
        lambda_tilde: rel.iter().map(|r| r / sum).collect(),
        total_photon_scale: log_total.exp(),
        log_total_photon_scale: log_total,
    })
}

/// `λ̃_k = sinh²(G√λ_k) / Σ_j sinh²(G√λ_j)`.
pub fn reweight_high_gain(weights: &[f64], gain: f64) -> Result<HighGainWeights> {
    if !(gain > 0.0 && gain.is_finite()) {
        return Err(Error::field("run.gain", "must be positive"));
    }
    if weights.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
        return Err(Error::Numerical("Schmidt weights must be non-negative".into()));
    }
    let x: Vec<f64> = weights.iter().map(|l| gain * l.sqrt()).collect();
    reweight_amplitudes(&x)
}

/// Coupling `g` for which the reweighted state carries `sinh²(gain)` photons
/// per effective mode: `Σ_k sinh²(g√λ_k) / K(g) = sinh²(gain)`.
///
/// A single mode gives `g = gain`; at low gain `g → gain·√K₀`.
pub fn calibrate_coupling(weights: &[f64], gain: f64) -> Result<f64> {
    if !(gain > 0.0 && gain.is_finite()) {
        return Err(Error::field("run.gain", "must be positive"));
    }
    let target = ln_sinh_sq(gain);
    let residual = |g: f64| -> Result<f64> { Ok(reweight_high_gain(weights, g)?.log_photons_per_mode() - target) };
    let (mut lo, mut hi) = (gain.min(1.0) * 1e-3, gain.max(1.0));
    let mut f_lo = residual(lo)?;
    while f_lo > 0.0 {
        lo *= 0.1;
        if lo < 1e-300 {
            return Err(Error::Numerical("coupling calibration failed to bracket".into()));
        }
        f_lo = residual(lo)?;
    }
    while residual(hi)? < 0.0 {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::Numerical("coupling calibration failed to bracket".into()));
        }
    }
    // bisection in ln g
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if hi / lo - 1.0 < 1e-14 {
            break;
        }
        if residual(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo * hi).sqrt())
}

/// `S(ω) = N·Σ_k λ̃_k |u_k(ω)|²` on the requested side.
pub fn synthesize_spectrum(
    decomposition: &SchmidtDecomposition,
    weights: &HighGainWeights,
    side: Arm,
) -> Result<Spectrum> {
    let modes = decomposition.modes(side);
    if modes.is_empty() {
        return Err(Error::Numerical(format!("no {} modes", side_name(side))));
    }
    if weights.lambda_tilde.len() != modes.len() {
        return Err(Error::Numerical(format!(
            "{} weights for {} modes",
            weights.lambda_tilde.len(),
            modes.len()
        )));
    }
    let grid = decomposition.grid();
    let n = grid.n_points();
    let mut density = vec![0.0; n];
    for (mode, lt) in modes.iter().zip(&weights.lambda_tilde) {
        for (d, u) in density.iter_mut().zip(mode) {
            *d += lt * u.norm_sqr();
        }
    }
    for d in density.iter_mut() {
        *d *= weights.total_photon_scale;
    }
    Spectrum::new(grid.omegas(), density)
}

/// Weights table: `k,lambda,lambda_tilde`.
pub fn write_weights_csv<W: Write>(lambda: &[f64], weights: &HighGainWeights, mut out: W) -> Result<()> {
    writeln!(out, "k,lambda,lambda_tilde")?;
    for (k, (l, lt)) in lambda.iter().zip(&weights.lambda_tilde).enumerate() {
        writeln!(out, "{k},{l:e},{lt:e}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> FrequencyGrid {
        FrequencyGrid::new(n, 2.0e15, 1.0e14).unwrap()
    }

    fn gaussian(g: &FrequencyGrid, mu: f64, sigma: f64) -> Vec<f64> {
        (0..g.n_points())
            .map(|i| {
                let x = (g.omega(i) - g.center()) / g.half_span();
                (-(x - mu).powi(2) / (2.0 * sigma * sigma)).exp()
            })
            .collect()
    }

    #[test]
    fn separable_kernel_has_one_mode() {
        let g = grid(64);
        let a = gaussian(&g, 0.1, 0.2);
        let b = gaussian(&g, -0.2, 0.3);
        let v: Vec<c64> = (0..64 * 64).map(|k| c64::new(a[k / 64] * b[k % 64], 0.0)).collect();
        let jsa = JointSpectralAmplitude::from_values(g, v).unwrap();
        let d = schmidt_decompose(&jsa, 1e-8).unwrap();
        assert_eq!(d.truncation_rank(), 1);
        assert!((d.weights()[0] - 1.0).abs() < 1e-12);
        assert!((d.schmidt_number() - 1.0).abs() < 1e-12);
        assert!(d.discarded_mass() < 1e-8);
        // spectrum ∝ |u₁|² ∝ a²
        let hg = reweight_high_gain(d.weights(), 3.0).unwrap();
        let s = synthesize_spectrum(&d, &hg, Arm::Signal).unwrap();
        let ratio = s.values()[20] / s.values()[30];
        assert!((ratio - (a[20] / a[30]).powi(2)).abs() < 1e-9 * ratio);
    }

    #[test]
    fn reweight_examples() {
        let one = reweight_high_gain(&[1.0], 7.0).unwrap();
        assert_eq!(one.lambda_tilde, vec![1.0]);
        for g in [0.1, 7.0, 40.0] {
            let half = reweight_high_gain(&[0.5, 0.5], g).unwrap();
            assert_eq!(half.lambda_tilde[0], half.lambda_tilde[1]);
            assert!((half.lambda_tilde[0] - 0.5).abs() < 1e-15);
        }
        let two = reweight_high_gain(&[0.8, 0.2], 7.0).unwrap();
        assert!((two.lambda_tilde[0] - 0.99810152753).abs() < 1e-10);
        assert!((two.lambda_tilde[1] - 0.00189847247).abs() < 1e-10);
        assert!(reweight_high_gain(&[1.0], 0.0).is_err());
        assert!(reweight_high_gain(&[1.0], -1.0).is_err());
    }

    #[test]
    fn log_domain_branch_is_continuous() {
        let below = ln_sinh_sq(20.0 - 1e-12);
        let above = ln_sinh_sq(20.0 + 1e-12);
        assert!((above - below).abs() < 1e-10);
        assert!(reweight_high_gain(&[0.6, 0.4], 1e4).unwrap().lambda_tilde[0] > 0.999_999);
    }

    #[test]
    fn calibration_limits() {
        let g = calibrate_coupling(&[1.0], 7.0).unwrap();
        assert!((g - 7.0).abs() < 1e-10, "{g}");
        // equal weights: every mode carries sinh²(g/√M)
        let m: f64 = 4.0;
        let g = calibrate_coupling(&[0.25; 4], 3.0).unwrap();
        assert!((g / m.sqrt() - 3.0).abs() < 1e-9);
        // low gain: g → gain·√K₀
        let w = [0.5, 0.3, 0.2];
        let k0 = 1.0 / w.iter().map(|x| x * x).sum::<f64>();
        let g = calibrate_coupling(&w, 1e-4).unwrap();
        assert!((g / (1e-4 * k0.sqrt()) - 1.0).abs() < 1e-6);
    }
}
