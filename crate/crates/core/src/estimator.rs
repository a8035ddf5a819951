//! DUT recovery by gradient descent: symmetric upper-triangular
//! parametrization, relative elementwise l1 loss, closed-form Jacobian with
//! a finite-difference oracle, and a multi-start Adam loop.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::campaign::MeasurementCampaign;
use crate::error::{Error, Result};
use crate::network::{C64, CMatrix, PFRealization, ScatteringMatrix};

/// Number of independent complex unknowns of a reciprocal n-port.
pub fn triangular_dim(n_s: usize) -> usize {
    n_s * (n_s + 1) / 2
}

/// Side length n such that d = n(n+1)/2, if d is a triangular number.
pub fn triangular_side(d: usize) -> Option<usize> {
    let mut n = 0usize;
    while triangular_dim(n) < d {
        n += 1;
    }
    (triangular_dim(n) == d).then_some(n)
}

/// Column-wise upper-triangular index enumeration:
/// (0,0), (0,1), (1,1), (0,2), (1,2), (2,2), ...
pub fn index_map(n_s: usize) -> Vec<(usize, usize)> {
    let mut map = Vec::with_capacity(triangular_dim(n_s));
    for j in 0..n_s {
        for i in 0..=j {
            map.push((i, j));
        }
    }
    map
}

/// The complex parameter vector of a reciprocal DUT together with its
/// upper-triangular index enumeration.
#[derive(Debug, Clone, PartialEq)]
pub struct DutParameterization {
    pub theta: Vec<C64>,
    pub n_s: usize,
}

impl DutParameterization {
    pub fn new(theta: Vec<C64>) -> Result<Self> {
        let n_s = triangular_side(theta.len()).ok_or_else(|| {
            Error::InvalidArgument(format!(
                "theta length {} is not a triangular number",
                theta.len()
            ))
        })?;
        Ok(DutParameterization { theta, n_s })
    }

    pub fn from_matrix(s: &ScatteringMatrix) -> Self {
        let n_s = s.n_ports();
        let theta = index_map(n_s)
            .into_iter()
            .map(|(i, j)| s.entries[(i, j)])
            .collect();
        DutParameterization { theta, n_s }
    }

    pub fn index_map(&self) -> Vec<(usize, usize)> {
        index_map(self.n_s)
    }

    pub fn d(&self) -> usize {
        self.theta.len()
    }
}

/// Expand an upper-triangular parameter vector into the symmetric matrix it
/// encodes: entries (i_k, j_k) and (j_k, i_k) both equal theta_k.
pub fn sym(theta: &[C64]) -> Result<ScatteringMatrix> {
    let p = DutParameterization::new(theta.to_vec())?;
    let mut m = CMatrix::zeros(p.n_s, p.n_s);
    for (k, (i, j)) in p.index_map().into_iter().enumerate() {
        m[(i, j)] = theta[k];
        m[(j, i)] = theta[k];
    }
    ScatteringMatrix::new(m)
}

/// Per-realization factors shared by the forward evaluation and the
/// Jacobian: with A = S_PF_RS, B = S_PF_ST, D = S_PF_SS and S = Sym(theta),
/// `al = A (I - S D)^{-1}` and `rb = (I - D S)^{-1} B`.
struct CascadeFactors {
    a: CMatrix,
    al: CMatrix,
    rb: CMatrix,
    s_rt: CMatrix,
}

fn cascade_factors(
    pf: &PFRealization,
    s: &CMatrix,
    tx: &[usize],
    rx: &[usize],
) -> Result<CascadeFactors> {
    let n_s = pf.n_s();
    let all: Vec<usize> = (0..n_s).collect();
    let a = CMatrix::from_fn(rx.len(), n_s, |i, j| pf.s_as[(rx[i], all[j])]);
    let b = CMatrix::from_fn(n_s, tx.len(), |i, j| pf.s_sa[(all[i], tx[j])]);
    let s_rt = CMatrix::from_fn(rx.len(), tx.len(), |i, j| pf.s_aa[(rx[i], tx[j])]);
    let eye = CMatrix::identity(n_s, n_s);
    let m_left = &eye - s * &pf.s_ss; // I - S D
    let m_right = &eye - &pf.s_ss * s; // I - D S
    // al^T solves (I - S D)^T x = A^T
    let al = m_left
        .transpose()
        .lu()
        .solve(&a.transpose())
        .ok_or(Error::ResonantCascade)?
        .transpose();
    let rb = m_right.lu().solve(&b).ok_or(Error::ResonantCascade)?;
    Ok(CascadeFactors { a, al, rb, s_rt })
}

/// Flatten a complex matrix column-major.
fn vec_cm(m: &CMatrix) -> Vec<C64> {
    m.iter().copied().collect()
}

/// Predicted measurements for every realization, flattened realization-major
/// and column-major within a realization.
pub fn predict_all(theta: &[C64], campaign: &MeasurementCampaign) -> Result<Vec<C64>> {
    let s = sym(theta)?.entries;
    let mut out = Vec::with_capacity(campaign.m() * campaign.p());
    for pf in &campaign.pf_known {
        let f = cascade_factors(pf, &s, &campaign.tx, &campaign.rx)?;
        // H = S_RT + A S (I - D S)^{-1} B = S_RT + A (S rb)
        let h = &f.s_rt + &f.a * (&s * &f.rb);
        out.extend(vec_cm(&h));
    }
    Ok(out)
}

fn measured_flat(campaign: &MeasurementCampaign) -> Vec<C64> {
    campaign.h_meas.iter().flat_map(vec_cm).collect()
}

/// Denominator of the relative misfit: the l1 mass of the DUT-induced part
/// of the measurements, sum_r ||H_meas_r - S_PF_RT(r)||_1.
fn dut_signature_l1(campaign: &MeasurementCampaign) -> f64 {
    let mut acc = 0.0;
    for (pf, h) in campaign.pf_known.iter().zip(campaign.h_meas.iter()) {
        for (i, &r) in campaign.rx.iter().enumerate() {
            for (j, &t) in campaign.tx.iter().enumerate() {
                acc += (h[(i, j)] - pf.s_aa[(r, t)]).norm();
            }
        }
    }
    acc
}

/// Relative elementwise l1 misfit between measured and predicted
/// transmissions across all realizations.
pub fn loss(theta: &[C64], campaign: &MeasurementCampaign) -> Result<f64> {
    let den = dut_signature_l1(campaign);
    if den == 0.0 {
        return Err(Error::DegenerateCampaign);
    }
    let pred = predict_all(theta, campaign)?;
    let meas = measured_flat(campaign);
    let num: f64 = pred
        .iter()
        .zip(meas.iter())
        .map(|(p, m)| (p - m).norm())
        .sum();
    Ok(num / den)
}

/// Closed-form Jacobian of the flattened measurement vector with respect to
/// theta: row block r holds the realization-r derivatives (column-major over
/// the H entries), column k the derivative along theta_k.
///
/// Computed in the inverse-free form
/// `J_k^(r) = vec(A (I - S D)^{-1} E_k (I - D S)^{-1} B)`.
pub fn analytic_jacobian(theta: &[C64], campaign: &MeasurementCampaign) -> Result<CMatrix> {
    let s = sym(theta)?.entries;
    let n_s = s.nrows();
    let d = theta.len();
    let map = index_map(n_s);
    let m = campaign.m();
    let p = campaign.p();
    let mut jac = CMatrix::zeros(m * p, d);
    for (r, pf) in campaign.pf_known.iter().enumerate() {
        let f = cascade_factors(pf, &s, &campaign.tx, &campaign.rx)?;
        let n_r = campaign.rx.len();
        let n_t = campaign.tx.len();
        for (k, &(ik, jk)) in map.iter().enumerate() {
            // A L E_k R B expands into at most two outer products of columns
            // of al with rows of rb.
            for col in 0..n_t {
                for row in 0..n_r {
                    let mut v = f.al[(row, ik)] * f.rb[(jk, col)];
                    if ik != jk {
                        v += f.al[(row, jk)] * f.rb[(ik, col)];
                    }
                    jac[(r * m + col * n_r + row, k)] = v;
                }
            }
        }
    }
    Ok(jac)
}

/// Central finite differences of the forward map along the real axis of each
/// parameter. The map is holomorphic in theta, so this equals the complex
/// derivative; see [`fd_jacobian_imag`] for the consistency companion.
pub fn fd_jacobian(theta: &[C64], campaign: &MeasurementCampaign, step: f64) -> Result<CMatrix> {
    fd_jacobian_axis(theta, campaign, step, C64::new(1.0, 0.0))
}

/// Central finite differences along the imaginary axis, divided by i. For a
/// holomorphic map this must agree with [`fd_jacobian`].
pub fn fd_jacobian_imag(theta: &[C64], campaign: &MeasurementCampaign, step: f64) -> Result<CMatrix> {
    fd_jacobian_axis(theta, campaign, step, C64::new(0.0, 1.0))
}

fn fd_jacobian_axis(
    theta: &[C64],
    campaign: &MeasurementCampaign,
    step: f64,
    direction: C64,
) -> Result<CMatrix> {
    if step <= 0.0 {
        return Err(Error::InvalidArgument("finite-difference step must be positive".into()));
    }
    let d = theta.len();
    let rows = campaign.m() * campaign.p();
    let mut jac = CMatrix::zeros(rows, d);
    let h = direction * C64::new(step, 0.0);
    for k in 0..d {
        let mut plus = theta.to_vec();
        plus[k] += h;
        let mut minus = theta.to_vec();
        minus[k] -= h;
        let fp = predict_all(&plus, campaign)?;
        let fm = predict_all(&minus, campaign)?;
        for i in 0..rows {
            jac[(i, k)] = (fp[i] - fm[i]) / (h * 2.0);
        }
    }
    Ok(jac)
}

/// Adam hyperparameters and stopping policy for [`estimate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorSettings {
    pub initial_step: f64,
    /// Multiplicative step decay applied every iteration.
    pub decay: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub max_iters: usize,
    /// Stop when the loss improvement over 50 iterations falls below this.
    pub loss_tolerance: f64,
    pub n_restarts: usize,
    /// Scale of the complex-Gaussian initialization.
    pub init_scale: f64,
    pub seed: u64,
}

impl Default for EstimatorSettings {
    fn default() -> Self {
        EstimatorSettings {
            initial_step: 0.05,
            decay: 0.999,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            max_iters: 20_000,
            loss_tolerance: 1e-10,
            n_restarts: 8,
            init_scale: 0.1,
            seed: 0,
        }
    }
}

impl EstimatorSettings {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.decay && self.decay <= 1.0) {
            return Err(Error::InvalidArgument("decay must lie in (0, 1]".into()));
        }
        if self.max_iters == 0 || self.n_restarts == 0 {
            return Err(Error::InvalidArgument(
                "max_iters and n_restarts must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Outcome of a recovery run.
#[derive(Debug, Clone)]
pub struct EstimateReport {
    pub theta_hat: Vec<C64>,
    pub s_dut_hat: ScatteringMatrix,
    pub final_loss: f64,
    /// Loss trace of the winning restart.
    pub loss_trace: Vec<f64>,
    /// Best loss reached by each restart, in restart order.
    pub restart_losses: Vec<f64>,
    pub converged: bool,
    /// Set when the best estimate is not passive.
    pub passivity_warning: bool,
}

struct RestartOutcome {
    theta: Vec<C64>,
    loss: f64,
    trace: Vec<f64>,
}

/// One Adam descent from the given initialization. Returns the best iterate
/// seen, not necessarily the last.
fn descend(
    theta0: Vec<C64>,
    campaign: &MeasurementCampaign,
    settings: &EstimatorSettings,
    den: f64,
) -> RestartOutcome {
    let d = theta0.len();
    let meas = measured_flat(campaign);
    // real parametrization: x[2k] = Re theta_k, x[2k+1] = Im theta_k
    let mut x: Vec<f64> = theta0
        .iter()
        .flat_map(|z| [z.re, z.im])
        .collect();
    let mut m1 = vec![0.0f64; 2 * d];
    let mut m2 = vec![0.0f64; 2 * d];
    let mut step = settings.initial_step;
    let mut trace = Vec::new();
    let mut best_loss = f64::INFINITY;
    let mut best_x = x.clone();
    let mut stall_reference = f64::INFINITY;
    let mut stall_iters = 0usize;

    for t in 1..=settings.max_iters {
        let theta: Vec<C64> = x.chunks_exact(2).map(|c| C64::new(c[0], c[1])).collect();
        let (pred, jac) = match (predict_all(&theta, campaign), analytic_jacobian(&theta, campaign))
        {
            (Ok(p), Ok(j)) => (p, j),
            // a resonant iterate ends this restart; keep the best seen so far
            _ => break,
        };
        let residuals: Vec<C64> = pred.iter().zip(meas.iter()).map(|(p, m)| p - m).collect();
        let cur_loss: f64 = residuals.iter().map(|r| r.norm()).sum::<f64>() / den;
        trace.push(cur_loss);
        if cur_loss < best_loss {
            best_loss = cur_loss;
            best_x.copy_from_slice(&x);
        }
        // The l1 subgradient keeps unit magnitude near the optimum, so Adam
        // oscillates at the current step scale. A 50-iteration stall of the
        // best loss means the step is too large, not that the run is done:
        // halve it, and stop only once the step has collapsed.
        if stall_reference - best_loss >= settings.loss_tolerance {
            stall_reference = best_loss;
            stall_iters = 0;
        } else {
            stall_iters += 1;
            if stall_iters >= 50 {
                step *= 0.5;
                stall_iters = 0;
                if step < settings.initial_step * 1e-12 {
                    break;
                }
            }
        }

        // d|r|/dtheta via the chain rule; subgradient 0 at exact zeros.
        let weights: Vec<C64> = residuals
            .iter()
            .map(|r| {
                let n = r.norm();
                if n == 0.0 { C64::new(0.0, 0.0) } else { r / n }
            })
            .collect();
        let mut grad = vec![0.0f64; 2 * d];
        for k in 0..d {
            let mut c = C64::new(0.0, 0.0);
            for (i, w) in weights.iter().enumerate() {
                c += w.conj() * jac[(i, k)];
            }
            c /= den;
            grad[2 * k] = c.re;
            grad[2 * k + 1] = -c.im;
        }

        let b1 = settings.adam_beta1;
        let b2 = settings.adam_beta2;
        let bc1 = 1.0 - b1.powi(t as i32);
        let bc2 = 1.0 - b2.powi(t as i32);
        for i in 0..2 * d {
            m1[i] = b1 * m1[i] + (1.0 - b1) * grad[i];
            m2[i] = b2 * m2[i] + (1.0 - b2) * grad[i] * grad[i];
            let mh = m1[i] / bc1;
            let vh = m2[i] / bc2;
            x[i] -= step * mh / (vh.sqrt() + settings.adam_epsilon);
        }
        step *= settings.decay;
    }

    let theta = best_x
        .chunks_exact(2)
        .map(|c| C64::new(c[0], c[1]))
        .collect();
    RestartOutcome {
        theta,
        loss: best_loss,
        trace,
    }
}

/// Multi-start Adam minimization of [`loss`]. Deterministic given campaign
/// and settings; the best restart wins, ties resolved by lowest index.
pub fn estimate(campaign: &MeasurementCampaign, settings: &EstimatorSettings) -> Result<EstimateReport> {
    settings.validate()?;
    campaign.validate()?;
    let den = dut_signature_l1(campaign);
    if den == 0.0 {
        return Err(Error::DegenerateCampaign);
    }
    let n_s = campaign
        .pf_known
        .first()
        .map(|pf| pf.n_s())
        .ok_or_else(|| Error::InvalidArgument("campaign has no realizations".into()))?;
    let d = triangular_dim(n_s);

    let outcomes: Vec<RestartOutcome> = (0..settings.n_restarts)
        .map(|r| {
            let mut rng =
                ChaCha12Rng::seed_from_u64(settings.seed.wrapping_add(0x9e3779b97f4a7c15u64.wrapping_mul(r as u64 + 1)));
            let normal = StandardNormal;
            let scale = settings.init_scale / 2f64.sqrt();
            let theta0: Vec<C64> = (0..d)
                .map(|_| {
                    let re: f64 = normal.sample(&mut rng);
                    let im: f64 = normal.sample(&mut rng);
                    C64::new(scale * re, scale * im)
                })
                .collect();
            descend(theta0, campaign, settings, den)
        })
        .collect();

    let restart_losses: Vec<f64> = outcomes.iter().map(|o| o.loss).collect();
    let best = outcomes
        .iter()
        .enumerate()
        .min_by(|(ia, a), (ib, b)| a.loss.partial_cmp(&b.loss).unwrap().then(ia.cmp(ib)))
        .map(|(_, o)| o)
        .ok_or_else(|| Error::InvalidArgument("no restarts were run".into()))?;

    let s_dut_hat = sym(&best.theta)?;
    let passivity_warning = s_dut_hat.spectral_norm() > 1.0;
    let converged = match campaign.snr_db {
        Some(snr) => best.loss < 10.0 * 10f64.powf(-snr / 20.0),
        None => best.loss < settings.loss_tolerance,
    };
    Ok(EstimateReport {
        theta_hat: best.theta.clone(),
        s_dut_hat,
        final_loss: best.loss,
        loss_trace: best.trace.clone(),
        restart_losses,
        converged,
        passivity_warning,
    })
}
