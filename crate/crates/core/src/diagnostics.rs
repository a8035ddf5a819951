//! Identifiability diagnostics: effective rank of the stacked Jacobian,
//! estimation error metrics, and the (m, p) sweep harness that maps out how
//! measurement count and fixture diversity trade off.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use crate::campaign::{extract_submatrix_campaign, simulate_campaign, Scenario};
use crate::error::{Error, Result};
use crate::estimator::{
    analytic_jacobian, estimate, triangular_dim, DutParameterization, EstimatorSettings,
};
use crate::network::{singular_values, ScatteringMatrix, Tolerances, C64};
use crate::tln::step2_series;

/// Exponential of the Shannon entropy of the normalized singular-value
/// distribution; a flatness measure of measurement diversity.
/// Zeros contribute nothing (0 * ln 0 := 0).
pub fn effective_rank(singular_values: &[f64]) -> Result<f64> {
    let total: f64 = singular_values.iter().sum();
    if !(total > 0.0) {
        return Err(Error::InvalidArgument(
            "effective rank needs at least one positive singular value".into(),
        ));
    }
    let entropy: f64 = singular_values
        .iter()
        .filter(|&&s| s > 0.0)
        .map(|&s| {
            let q = s / total;
            -q * q.ln()
        })
        .sum();
    Ok(entropy.exp())
}

/// Singular-value spectrum and effective rank of the Jacobian at a
/// reference parameter vector.
#[derive(Debug, Clone)]
pub struct RankReport {
    /// Descending, length min(m*p, d).
    pub singular_values: Vec<f64>,
    pub effective_rank: f64,
    pub m: usize,
    pub p: usize,
    pub d: usize,
    pub tx_rx_label: String,
}

fn tx_rx_label(tx: &[usize], rx: &[usize]) -> String {
    let join = |v: &[usize]| {
        v.iter()
            .map(|i| i.to_string())
            .collect::<Vec<_>>()
            .join("+")
    };
    format!("{};{}", join(tx), join(rx))
}

/// Build the stacked Jacobian at `theta0` and report its singular-value
/// spectrum and effective rank.
pub fn jacobian_rank_at(
    theta0: &[C64],
    campaign: &crate::campaign::MeasurementCampaign,
) -> Result<RankReport> {
    let jac = analytic_jacobian(theta0, campaign)?;
    let m = campaign.m();
    let p = campaign.p();
    let d = theta0.len();
    let n_tilde = (m * p).min(d);
    let mut sv = singular_values(&jac);
    sv.truncate(n_tilde);
    let r = effective_rank(&sv)?;
    Ok(RankReport {
        singular_values: sv,
        effective_rank: r,
        m,
        p,
        d,
        tx_rx_label: tx_rx_label(&campaign.tx, &campaign.rx),
    })
}

/// Mean-squared error of an estimate, raw and normalized by the truth's
/// mean entry power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mse {
    pub raw: f64,
    pub normalized: f64,
}

pub fn mse(s_hat: &ScatteringMatrix, s_true: &ScatteringMatrix) -> Result<Mse> {
    if s_hat.n_ports() != s_true.n_ports() {
        return Err(Error::DimensionMismatch(
            "estimate and truth must have equal dimensions".into(),
        ));
    }
    let n2 = s_true.entries.len() as f64;
    let raw = s_hat
        .entries
        .iter()
        .zip(s_true.entries.iter())
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        / n2;
    let truth_power = s_true.entries.iter().map(|z| z.norm_sqr()).sum::<f64>() / n2;
    let normalized = if truth_power > 0.0 {
        raw / truth_power
    } else {
        f64::INFINITY
    };
    Ok(Mse { raw, normalized })
}

/// Reference point for the rank analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankReference {
    /// Linearize around the scenario's true DUT.
    Truth,
    /// Linearize around a random reciprocal passive draw with this seed.
    Random(u64),
}

/// Knobs of the (m, p) sweep.
#[derive(Debug, Clone)]
pub struct SweepSettings {
    /// Cap on the number of TX/RX subset choices examined per split;
    /// excess choices are sampled with a seeded shuffle.
    pub max_choices: usize,
    /// Also run the estimator per cell (much slower than rank-only).
    pub with_estimate: bool,
    pub estimator: EstimatorSettings,
    pub reference: RankReference,
}

impl Default for SweepSettings {
    fn default() -> Self {
        SweepSettings {
            max_choices: 16,
            with_estimate: false,
            estimator: EstimatorSettings::default(),
            reference: RankReference::Truth,
        }
    }
}

/// One sweep cell outcome.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub n_a: usize,
    pub n_t: usize,
    pub n_r: usize,
    pub m: usize,
    pub p: usize,
    pub tx_rx: String,
    pub effective_rank: f64,
    pub mse: f64,
    pub mse_normalized: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stat {
    Mean,
    Min,
    Max,
}

impl Stat {
    fn name(self) -> &'static str {
        match self {
            Stat::Mean => "mean",
            Stat::Min => "min",
            Stat::Max => "max",
        }
    }
}

#[derive(Debug, Clone)]
pub struct AggregateRow {
    pub m: usize,
    pub p: usize,
    pub stat: Stat,
    pub effective_rank: f64,
    pub mse: f64,
}

#[derive(Debug, Clone, Default)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    /// Cells that failed, with the error text; the sweep continues past them.
    pub failures: Vec<String>,
}

impl SweepResult {
    /// Per-(m, p) mean/min/max aggregates over all choices and seeds.
    pub fn aggregate(&self) -> Vec<AggregateRow> {
        let mut keys: Vec<(usize, usize)> = self.rows.iter().map(|r| (r.m, r.p)).collect();
        keys.sort_unstable();
        keys.dedup();
        let mut out = Vec::new();
        for (m, p) in keys {
            let group: Vec<&SweepRow> =
                self.rows.iter().filter(|r| r.m == m && r.p == p).collect();
            let n = group.len() as f64;
            for stat in [Stat::Mean, Stat::Min, Stat::Max] {
                let pick = |f: &dyn Fn(&SweepRow) -> f64| match stat {
                    Stat::Mean => group.iter().map(|r| f(r)).sum::<f64>() / n,
                    Stat::Min => group.iter().map(|r| f(r)).fold(f64::INFINITY, f64::min),
                    Stat::Max => group.iter().map(|r| f(r)).fold(f64::NEG_INFINITY, f64::max),
                };
                out.push(AggregateRow {
                    m,
                    p,
                    stat,
                    effective_rank: pick(&|r| r.effective_rank),
                    mse: pick(&|r| r.mse),
                });
            }
        }
        out
    }

    pub fn rows_csv(&self) -> String {
        // mse cells are left empty on rank-only sweeps
        let cell = |v: f64| if v.is_nan() { String::new() } else { v.to_string() };
        let mut s = String::from("n_a,n_t,n_r,m,p,tx_rx,effective_rank,mse,mse_normalized,seed\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                r.n_a,
                r.n_t,
                r.n_r,
                r.m,
                r.p,
                r.tx_rx,
                r.effective_rank,
                cell(r.mse),
                cell(r.mse_normalized),
                r.seed
            ));
        }
        s
    }

    pub fn aggregate_csv(&self) -> String {
        let cell = |v: f64| if v.is_finite() { v.to_string() } else { String::new() };
        let mut s = String::from("m,p,stat,effective_rank,mse\n");
        for r in self.aggregate() {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                r.m,
                r.p,
                r.stat.name(),
                r.effective_rank,
                cell(r.mse)
            ));
        }
        s
    }
}

fn subsets(pool: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    if k == 0 || k > pool.len() {
        return out;
    }
    loop {
        out.push(idx.iter().map(|&i| pool[i]).collect());
        // next combination
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if idx[i] != i + pool.len() - k {
                break;
            }
            if i == 0 {
                return out;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Run the rank (and optionally estimation) analysis over a grid of
/// realization counts, TX/RX splits, and seeds.
///
/// The p-values for one seed are nested prefixes of a single step-2 series,
/// so larger p strictly extends smaller p. Cells run in parallel; the output
/// row order is deterministic regardless of parallelism.
pub fn sweep(
    scenario: &Scenario,
    p_values: &[usize],
    antenna_splits: &[(usize, usize)],
    seeds: &[u64],
    settings: &SweepSettings,
    tol: &Tolerances,
) -> Result<SweepResult> {
    scenario.validate(tol)?;
    let n_s = scenario.n_s();
    let max_p = p_values.iter().copied().max().unwrap_or(0);
    if max_p == 0 {
        return Err(Error::InvalidArgument("p_values must be non-empty".into()));
    }
    let tx_pool = scenario.partition.tx.clone();
    let rx_pool = scenario.partition.rx.clone();
    for &(n_t, n_r) in antenna_splits {
        if n_t == 0 || n_r == 0 || n_t > tx_pool.len() || n_r > rx_pool.len() {
            return Err(Error::InvalidArgument(format!(
                "split {n_t}x{n_r} incompatible with {} TX / {} RX pool ports",
                tx_pool.len(),
                rx_pool.len()
            )));
        }
    }

    // cell = (seed, split, concrete tx/rx choice)
    struct Cell {
        seed: u64,
        n_t: usize,
        n_r: usize,
        tx: Vec<usize>,
        rx: Vec<usize>,
    }
    let mut cells = Vec::new();
    for &seed in seeds {
        for &(n_t, n_r) in antenna_splits {
            let tx_choices = subsets(&tx_pool, n_t);
            let rx_choices = subsets(&rx_pool, n_r);
            let mut pairs: Vec<(Vec<usize>, Vec<usize>)> = tx_choices
                .iter()
                .flat_map(|t| rx_choices.iter().map(move |r| (t.clone(), r.clone())))
                .collect();
            if pairs.len() > settings.max_choices {
                let mut rng = ChaCha12Rng::seed_from_u64(
                    seed ^ ((n_t as u64) << 32) ^ (n_r as u64) ^ 0x7378_6f69_6365,
                );
                let picked = sample(&mut rng, pairs.len(), settings.max_choices);
                pairs = picked.iter().map(|i| pairs[i].clone()).collect();
            }
            for (tx, rx) in pairs {
                cells.push(Cell { seed, n_t, n_r, tx, rx });
            }
        }
    }

    let truth_theta = DutParameterization::from_matrix(&scenario.s_dut_true).theta;
    let d = triangular_dim(n_s);
    let outcomes: Vec<(Vec<SweepRow>, Vec<String>)> = cells
        .par_iter()
        .map(|cell| {
            let mut rows = Vec::new();
            let mut failures = Vec::new();
            let mut run = || -> Result<()> {
                let mut sc = scenario.clone();
                sc.seed = cell.seed;
                let configs = step2_series(n_s, max_p, cell.seed, tol)?;
                let full = simulate_campaign(&sc, &configs, &tx_pool, &rx_pool, tol)?;
                let sub_full = extract_submatrix_campaign(&full, &cell.tx, &cell.rx)?;
                let theta0 = match settings.reference {
                    RankReference::Truth => truth_theta.clone(),
                    RankReference::Random(s) => {
                        let m = crate::network::random_passive_reciprocal(n_s, s, 0.9)?;
                        DutParameterization::from_matrix(&m).theta
                    }
                };
                for &p in p_values {
                    let sub = sub_full.prefix(p);
                    let rank = jacobian_rank_at(&theta0, &sub)?;
                    let (mse_raw, mse_norm) = if settings.with_estimate {
                        let report = estimate(&sub, &settings.estimator)?;
                        let e = mse(&report.s_dut_hat, &scenario.s_dut_true)?;
                        (e.raw, e.normalized)
                    } else {
                        (f64::NAN, f64::NAN)
                    };
                    rows.push(SweepRow {
                        n_a: cell.n_t + cell.n_r,
                        n_t: cell.n_t,
                        n_r: cell.n_r,
                        m: cell.n_t * cell.n_r,
                        p,
                        tx_rx: tx_rx_label(&cell.tx, &cell.rx),
                        effective_rank: rank.effective_rank,
                        mse: mse_raw,
                        mse_normalized: mse_norm,
                        seed: cell.seed,
                    });
                }
                Ok(())
            };
            if let Err(e) = run() {
                failures.push(format!(
                    "seed {} choice {}: {e}",
                    cell.seed,
                    tx_rx_label(&cell.tx, &cell.rx)
                ));
            }
            (rows, failures)
        })
        .collect();

    let mut result = SweepResult::default();
    for (rows, failures) in outcomes {
        result.rows.extend(rows);
        result.failures.extend(failures);
    }
    result
        .rows
        .sort_by(|a, b| (a.m, a.p, a.tx_rx.clone(), a.seed).cmp(&(b.m, b.p, b.tx_rx.clone(), b.seed)));
    result.failures.sort();
    debug_assert!(result.rows.iter().all(|r| r.effective_rank <= d as f64 + 1e-9));
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::campaign::MeasurementCampaign;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn effective_rank_flat_spectrum() {
        for k in 1..=6usize {
            let sv = vec![0.7; k];
            let r = effective_rank(&sv).unwrap();
            assert!((r - k as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn effective_rank_single_mode() {
        let r = effective_rank(&[2.5, 0.0, 0.0]).unwrap();
        assert!((r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn effective_rank_two_modes() {
        // direct scalar evaluation: shares 3/4 and 1/4
        let q = [0.75f64, 0.25];
        let expect = (-q.iter().map(|x| x * x.ln()).sum::<f64>()).exp();
        let r = effective_rank(&[3.0, 1.0]).unwrap();
        assert!((r - expect).abs() < 1e-12);
        assert!((r - 1.754765).abs() < 1e-6);
    }

    #[test]
    fn effective_rank_rejects_all_zero() {
        assert!(effective_rank(&[0.0, 0.0]).is_err());
        assert!(effective_rank(&[]).is_err());
    }

    #[test]
    fn effective_rank_scale_invariance() {
        let sv = [5.0, 3.0, 0.5, 0.01];
        let scaled: Vec<f64> = sv.iter().map(|s| s * 137.0).collect();
        let a = effective_rank(&sv).unwrap();
        let b = effective_rank(&scaled).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    fn siso_campaign(p: usize, seed: u64) -> (Scenario, MeasurementCampaign) {
        let scenario = Scenario::synthetic(2, 4, seed).unwrap();
        let configs = step2_series(4, p, seed, &tol()).unwrap();
        let c = simulate_campaign(&scenario, &configs, &[0], &[1], &tol()).unwrap();
        (scenario, c)
    }

    #[test]
    fn siso_single_realization_rank_is_one() {
        let (scenario, c) = siso_campaign(1, 2);
        let theta = DutParameterization::from_matrix(&scenario.s_dut_true).theta;
        let r = jacobian_rank_at(&theta, &c).unwrap();
        assert!((r.effective_rank - 1.0).abs() < 1e-9);
        assert_eq!(r.singular_values.len(), 1);
        assert_eq!((r.m, r.p, r.d), (1, 1, 10));
    }

    #[test]
    fn rank_respects_bounds() {
        for p in [1usize, 3, 10] {
            let (scenario, c) = siso_campaign(p, 4);
            let theta = DutParameterization::from_matrix(&scenario.s_dut_true).theta;
            let r = jacobian_rank_at(&theta, &c).unwrap();
            let n_tilde = (r.m * r.p).min(r.d) as f64;
            assert!(r.effective_rank >= 1.0 - 1e-12);
            assert!(r.effective_rank <= n_tilde + 1e-12);
        }
    }

    #[test]
    fn duplicated_realization_adds_no_diversity() {
        let (scenario, c) = siso_campaign(1, 6);
        let theta = DutParameterization::from_matrix(&scenario.s_dut_true).theta;
        let single = jacobian_rank_at(&theta, &c).unwrap();
        let mut doubled = c.clone();
        doubled.configs.push(doubled.configs[0].clone());
        doubled.h_meas.push(doubled.h_meas[0].clone());
        doubled.pf_known.push(doubled.pf_known[0].clone());
        let twice = jacobian_rank_at(&theta, &doubled).unwrap();
        assert!((single.effective_rank - twice.effective_rank).abs() < 1e-9);
    }

    #[test]
    fn mse_examples() {
        let s = crate::network::random_passive_reciprocal(3, 1, 0.9).unwrap();
        let e = mse(&s, &s).unwrap();
        assert_eq!(e.raw, 0.0);
        let zero = ScatteringMatrix::zeros(3);
        let e0 = mse(&zero, &s).unwrap();
        let truth_power = s.entries.iter().map(|z| z.norm_sqr()).sum::<f64>() / 9.0;
        assert!((e0.raw - truth_power).abs() < 1e-15);
        assert!((e0.normalized - 1.0).abs() < 1e-12);

        let mut one = ScatteringMatrix::zeros(1);
        one.entries[(0, 0)] = C64::new(0.4, 0.1);
        let mut shifted = one.clone();
        let delta = C64::new(0.03, -0.02);
        shifted.entries[(0, 0)] += delta;
        let e1 = mse(&shifted, &one).unwrap();
        assert!((e1.raw - delta.norm_sqr()).abs() < 1e-16);

        assert!(mse(&zero, &one).is_err());
    }

    #[test]
    fn sweep_structure_and_rank_monotonicity() {
        let scenario = Scenario::synthetic(8, 4, 11).unwrap();
        let p_values = [1usize, 3, 8];
        let splits = [(1usize, 1usize), (2, 2)];
        let settings = SweepSettings {
            max_choices: 4,
            ..Default::default()
        };
        let result = sweep(&scenario, &p_values, &splits, &[5], &settings, &tol()).unwrap();
        assert!(result.failures.is_empty(), "{:?}", result.failures);
        assert_eq!(result.rows.len(), (4 + 4) * p_values.len());
        // nested prefixes: effective rank non-decreasing in p per choice
        let mut labels: Vec<String> = result.rows.iter().map(|r| r.tx_rx.clone()).collect();
        labels.sort();
        labels.dedup();
        assert_eq!(labels.len(), 8);
        for label in &labels {
            let series: Vec<&SweepRow> =
                result.rows.iter().filter(|r| &r.tx_rx == label).collect();
            assert_eq!(series.len(), p_values.len());
            for w in series.windows(2) {
                assert!(w[0].p < w[1].p);
                assert!(w[1].effective_rank >= w[0].effective_rank - 1e-9);
            }
        }
        let agg = result.aggregate();
        assert_eq!(agg.len(), 2 * p_values.len() * 3);
        let csv = result.rows_csv();
        assert!(csv.starts_with("n_a,n_t,n_r,m,p,tx_rx,effective_rank,mse,mse_normalized,seed\n"));
        let acsv = result.aggregate_csv();
        assert!(acsv.starts_with("m,p,stat,effective_rank,mse\n"));
    }

    #[test]
    fn sweep_rejects_bad_split() {
        let scenario = Scenario::synthetic(4, 2, 1).unwrap();
        let settings = SweepSettings::default();
        assert!(sweep(&scenario, &[1], &[(5, 1)], &[1], &settings, &tol()).is_err());
    }

    #[test]
    fn siso_choice_count_for_four_by_four_pools() {
        // 8 accessible ports split into 4 TX / 4 RX pools: 16 scalar choices
        let pool: Vec<usize> = (0..4).collect();
        assert_eq!(subsets(&pool, 1).len() * subsets(&pool, 1).len(), 16);
        assert_eq!(subsets(&pool, 2).len(), 6);
        assert_eq!(subsets(&pool, 4).len(), 1);
    }
}
