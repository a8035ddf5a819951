//! Complex scattering-matrix types, port-index bookkeeping, Redheffer star
//! composition of the over-the-air fixture with a tunable load network, and
//! the forward model mapping a DUT to the transmission seen at accessible
//! ports.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

/// Numeric tolerances and caps used across the library. All defaults can be
/// overridden; none are hard-coded at use sites.
#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    /// Absolute tolerance for reciprocity (symmetry) checks.
    pub reciprocity: f64,
    /// Slack allowed above 1.0 in passivity (spectral-norm) checks.
    pub passivity: f64,
    /// Condition-number cap for the star-product and cascade resolvents.
    pub condition_cap: f64,
    /// Maximum number of configurations `enumerate_configs` will produce.
    pub enumeration_cap: u128,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            reciprocity: 1e-12,
            passivity: 1e-12,
            condition_cap: 1e12,
            enumeration_cap: 1_000_000,
        }
    }
}

/// A square complex scattering matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringMatrix {
    pub entries: CMatrix,
}

impl ScatteringMatrix {
    pub fn new(entries: CMatrix) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "scattering matrix must be square, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        Ok(ScatteringMatrix { entries })
    }

    pub fn zeros(n: usize) -> Self {
        ScatteringMatrix {
            entries: CMatrix::zeros(n, n),
        }
    }

    pub fn n_ports(&self) -> usize {
        self.entries.nrows()
    }

    /// Largest singular value.
    pub fn spectral_norm(&self) -> f64 {
        spectral_norm(&self.entries)
    }

    /// Maximum absolute deviation from symmetry.
    pub fn asymmetry(&self) -> f64 {
        let m = &self.entries;
        let mut worst = 0.0f64;
        for i in 0..m.nrows() {
            for j in (i + 1)..m.ncols() {
                worst = worst.max((m[(i, j)] - m[(j, i)]).norm());
            }
        }
        worst
    }

    pub fn is_reciprocal(&self, tol: &Tolerances) -> bool {
        self.asymmetry() <= tol.reciprocity
    }

    pub fn is_passive(&self, tol: &Tolerances) -> bool {
        self.spectral_norm() <= 1.0 + tol.passivity
    }
}

pub fn spectral_norm(m: &CMatrix) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// Singular values in descending order.
pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    let svd = m.clone().svd(false, false);
    let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    sv
}

fn condition_number(m: &CMatrix) -> f64 {
    let sv = singular_values(m);
    match (sv.first(), sv.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        _ => f64::INFINITY,
    }
}

/// Port-index bookkeeping for the cascade. All indices are zero-based.
///
/// `accessible`, `nda_side` index into the OTA fixture's matrix;
/// `tln_ota_side` and `dut_side` index into the TLN's 2*N_S-port matrix;
/// `tx` and `rx` are subsets of `accessible`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PortPartition {
    pub accessible: Vec<usize>,
    pub tx: Vec<usize>,
    pub rx: Vec<usize>,
    pub nda_side: Vec<usize>,
    pub tln_ota_side: Vec<usize>,
    pub dut_side: Vec<usize>,
}

impl PortPartition {
    /// The conventional layout: OTA ports `0..n_a` accessible (first half TX,
    /// second half RX), ports `n_a..n_a+n_s` facing the TLN; TLN ports
    /// `0..n_s` on the OTA side and `n_s..2*n_s` on the DUT side.
    pub fn standard(n_a: usize, n_s: usize) -> Self {
        let accessible: Vec<usize> = (0..n_a).collect();
        let tx: Vec<usize> = (0..n_a / 2).collect();
        let rx: Vec<usize> = (n_a / 2..n_a).collect();
        PortPartition {
            accessible,
            tx,
            rx,
            nda_side: (n_a..n_a + n_s).collect(),
            tln_ota_side: (0..n_s).collect(),
            dut_side: (n_s..2 * n_s).collect(),
        }
    }

    pub fn n_a(&self) -> usize {
        self.accessible.len()
    }

    pub fn n_s(&self) -> usize {
        self.nda_side.len()
    }

    pub fn validate(&self) -> Result<()> {
        let mut union: Vec<usize> = self.tx.iter().chain(self.rx.iter()).copied().collect();
        union.sort_unstable();
        let mut acc = self.accessible.clone();
        acc.sort_unstable();
        if union != acc {
            return Err(Error::InvalidArgument(
                "tx and rx must partition the accessible ports".into(),
            ));
        }
        if self.tx.iter().any(|t| self.rx.contains(t)) {
            return Err(Error::InvalidArgument("tx and rx must be disjoint".into()));
        }
        let n_s = self.nda_side.len();
        if self.tln_ota_side.len() != n_s || self.dut_side.len() != n_s {
            return Err(Error::InvalidArgument(
                "nda_side, tln_ota_side and dut_side must have equal size".into(),
            ));
        }
        Ok(())
    }
}

/// The four blocks of the programmable fixture's scattering matrix for one
/// TLN configuration, indexed (accessible, DUT-facing).
#[derive(Debug, Clone, PartialEq)]
pub struct PFRealization {
    pub s_aa: CMatrix,
    pub s_as: CMatrix,
    pub s_sa: CMatrix,
    pub s_ss: CMatrix,
    /// Token of the generating TLN configuration, when known.
    pub config_id: Option<String>,
}

impl PFRealization {
    pub fn n_a(&self) -> usize {
        self.s_aa.nrows()
    }

    pub fn n_s(&self) -> usize {
        self.s_ss.nrows()
    }
}

fn submatrix(m: &CMatrix, rows: &[usize], cols: &[usize]) -> CMatrix {
    CMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

/// Star-compose the OTA fixture with one TLN realization into the
/// programmable fixture seen between accessible ports and DUT ports.
pub fn compose_pf(
    s_ota: &ScatteringMatrix,
    s_tln: &ScatteringMatrix,
    partition: &PortPartition,
    tol: &Tolerances,
) -> Result<PFRealization> {
    partition.validate()?;
    let n_a = partition.n_a();
    let n_s = partition.n_s();
    if s_ota.n_ports() != n_a + n_s {
        return Err(Error::DimensionMismatch(format!(
            "OTA fixture has {} ports, partition requires {}",
            s_ota.n_ports(),
            n_a + n_s
        )));
    }
    if s_tln.n_ports() != 2 * n_s {
        return Err(Error::DimensionMismatch(format!(
            "TLN has {} ports, partition requires {}",
            s_tln.n_ports(),
            2 * n_s
        )));
    }

    let a = &partition.accessible;
    let c = &partition.nda_side;
    let cb = &partition.tln_ota_side;
    let s = &partition.dut_side;

    let ota_aa = submatrix(&s_ota.entries, a, a);
    let ota_ac = submatrix(&s_ota.entries, a, c);
    let ota_ca = submatrix(&s_ota.entries, c, a);
    let ota_cc = submatrix(&s_ota.entries, c, c);
    let tln_cc = submatrix(&s_tln.entries, cb, cb);
    let tln_cs = submatrix(&s_tln.entries, cb, s);
    let tln_sc = submatrix(&s_tln.entries, s, cb);
    let tln_ss = submatrix(&s_tln.entries, s, s);

    let eye = CMatrix::identity(n_s, n_s);
    let m1 = &ota_cc * &tln_cc - &eye;
    let m2 = &tln_cc * &ota_cc - &eye;
    if condition_number(&m1) > tol.condition_cap {
        return Err(Error::CompositionSingular { config_id: None });
    }

    // X1 * S_CA and X2 * S_TLN_CS via linear solves.
    let x1_ca = m1
        .clone()
        .lu()
        .solve(&ota_ca)
        .ok_or(Error::CompositionSingular { config_id: None })?;
    let x2_cs = m2
        .clone()
        .lu()
        .solve(&tln_cs)
        .ok_or(Error::CompositionSingular { config_id: None })?;

    Ok(PFRealization {
        s_aa: &ota_aa - &ota_ac * &tln_cc * &x1_ca,
        s_as: -(&ota_ac * &x2_cs),
        s_sa: -(&tln_sc * &x1_ca),
        s_ss: &tln_ss - &tln_sc * &ota_cc * &x2_cs,
        config_id: None,
    })
}

/// Resolvent factor `(I - S_DUT * S_PF_SS)^{-1} * S_DUT * B`, computed by a
/// linear solve. Shared by the forward model and the Jacobian.
fn cascade_solve(s_ss: &CMatrix, s_dut: &CMatrix, rhs: &CMatrix, tol: &Tolerances) -> Result<CMatrix> {
    let n = s_dut.nrows();
    let m = CMatrix::identity(n, n) - s_dut * s_ss;
    if condition_number(&m) > tol.condition_cap {
        return Err(Error::ResonantCascade);
    }
    m.lu().solve(rhs).ok_or(Error::ResonantCascade)
}

/// Transmission matrix H between the chosen TX and RX accessible ports with
/// the DUT terminating the fixture's DUT-facing ports.
///
/// Uses the inverse-free form `H = S_RT + S_RS * S_DUT * (I - S_SS S_DUT)^{-1} * S_ST`,
/// valid for singular DUTs as well.
pub fn forward_model(
    pf: &PFRealization,
    s_dut: &ScatteringMatrix,
    tx: &[usize],
    rx: &[usize],
    tol: &Tolerances,
) -> Result<CMatrix> {
    let n_s = pf.n_s();
    if s_dut.n_ports() != n_s {
        return Err(Error::DimensionMismatch(format!(
            "DUT has {} ports, fixture expects {}",
            s_dut.n_ports(),
            n_s
        )));
    }
    let n_a = pf.n_a();
    if tx.iter().chain(rx.iter()).any(|&i| i >= n_a) {
        return Err(Error::DimensionMismatch(
            "tx/rx index outside accessible range".into(),
        ));
    }
    let all_rows: Vec<usize> = (0..n_s).collect();
    let b_st = submatrix(&pf.s_sa, &all_rows, tx);
    let a_rs = submatrix(&pf.s_as, rx, &all_rows);
    let s_rt = submatrix(&pf.s_aa, rx, tx);
    // (I - S D)^{-1} S B = S (I - D S)^{-1} B
    let w = &s_dut.entries * &b_st;
    let x = cascade_solve(&pf.s_ss, &s_dut.entries, &w, tol)?;
    Ok(s_rt + a_rs * x)
}

/// Full accessible-port scattering matrix with the DUT attached;
/// `forward_model` is its (RX, TX) block restriction.
pub fn measurable_s(
    pf: &PFRealization,
    s_dut: &ScatteringMatrix,
    tol: &Tolerances,
) -> Result<ScatteringMatrix> {
    let all: Vec<usize> = (0..pf.n_a()).collect();
    let entries = forward_model(pf, s_dut, &all, &all, tol)?;
    Ok(ScatteringMatrix { entries })
}

/// Random symmetric complex matrix with spectral norm `norm_cap * u`,
/// `u ~ U[0.5, 1]`; deterministic given `seed`.
pub fn random_passive_reciprocal(n: usize, seed: u64, norm_cap: f64) -> Result<ScatteringMatrix> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    if !(0.0 < norm_cap && norm_cap < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "norm_cap must lie in (0, 1), got {norm_cap}"
        )));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let normal = StandardNormal;
    let g = CMatrix::from_fn(n, n, |_, _| {
        C64::new(normal.sample(&mut rng), normal.sample(&mut rng))
    });
    let sym = (&g + g.transpose()) * C64::new(0.5, 0.0);
    let u: f64 = Uniform::new(0.5, 1.0).unwrap().sample(&mut rng);
    let target = norm_cap * u;
    let norm = spectral_norm(&sym);
    let scale = if norm > 0.0 { target / norm } else { 0.0 };
    Ok(ScatteringMatrix {
        entries: sym * C64::new(scale, 0.0),
    })
}
