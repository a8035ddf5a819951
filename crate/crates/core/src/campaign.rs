//! Measurement-campaign simulation: builds the ground-truth world (OTA
//! fixture, TLN hardware, DUT), realizes the programmable fixture per TLN
//! configuration, and produces the noisy transmission measurements together
//! with the estimator's (possibly imperfect) fixture knowledge.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::network::{
    compose_pf, forward_model, random_passive_reciprocal, C64, CMatrix, PFRealization,
    PortPartition, ScatteringMatrix, Tolerances,
};
use crate::tln::{synthesize_tln, TLNConfiguration, TLNHardwareModel};

/// Ground truth plus imperfection knobs for one simulated experiment.
///
/// `snr_db` controls additive measurement noise; `ota_knowledge_error_db`
/// perturbs the estimator's copy of the OTA fixture. `None` disables the
/// respective imperfection.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub s_ota: ScatteringMatrix,
    pub hw: TLNHardwareModel,
    pub s_dut_true: ScatteringMatrix,
    pub partition: PortPartition,
    pub snr_db: Option<f64>,
    pub ota_knowledge_error_db: Option<f64>,
    pub seed: u64,
}

impl Scenario {
    /// Fully synthetic scenario: random passive reciprocal OTA fixture and
    /// DUT, default TLN hardware, standard port layout.
    pub fn synthetic(n_a: usize, n_s: usize, seed: u64) -> Result<Self> {
        let s_ota = random_passive_reciprocal(n_a + n_s, seed.wrapping_mul(2).wrapping_add(1), 0.95)?;
        let s_dut_true = random_passive_reciprocal(n_s, seed.wrapping_mul(2).wrapping_add(2), 0.9)?;
        Ok(Scenario {
            s_ota,
            hw: TLNHardwareModel::default(),
            s_dut_true,
            partition: PortPartition::standard(n_a, n_s),
            snr_db: None,
            ota_knowledge_error_db: None,
            seed,
        })
    }

    pub fn n_s(&self) -> usize {
        self.partition.n_s()
    }

    pub fn n_a(&self) -> usize {
        self.partition.n_a()
    }

    pub fn validate(&self, tol: &Tolerances) -> Result<()> {
        self.partition.validate()?;
        self.hw.validate()?;
        if self.s_ota.n_ports() != self.n_a() + self.n_s() {
            return Err(Error::DimensionMismatch(
                "OTA fixture port count does not match the partition".into(),
            ));
        }
        if self.s_dut_true.n_ports() != self.n_s() {
            return Err(Error::DimensionMismatch(
                "DUT port count does not match the partition".into(),
            ));
        }
        if !self.s_dut_true.is_reciprocal(tol) {
            return Err(Error::InvalidArgument("true DUT must be reciprocal".into()));
        }
        if !self.s_dut_true.is_passive(tol) {
            return Err(Error::InvalidArgument("true DUT must be passive".into()));
        }
        if let Some(snr) = self.snr_db {
            if !(snr > 0.0) {
                return Err(Error::InvalidArgument("snr_db must be positive".into()));
            }
        }
        Ok(())
    }
}

/// An ordered set of (configuration, measured H) pairs together with the
/// fixture knowledge used by the estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementCampaign {
    pub configs: Vec<TLNConfiguration>,
    /// TX / RX index sets into the accessible ports of the fixture blocks.
    pub tx: Vec<usize>,
    pub rx: Vec<usize>,
    pub h_meas: Vec<CMatrix>,
    pub pf_known: Vec<PFRealization>,
    /// SNR the measurements were simulated at, when known.
    pub snr_db: Option<f64>,
}

impl MeasurementCampaign {
    pub fn p(&self) -> usize {
        self.configs.len()
    }

    /// Independent scattering coefficients per realization.
    pub fn m(&self) -> usize {
        self.tx.len() * self.rx.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.h_meas.len() != self.configs.len() || self.pf_known.len() != self.configs.len() {
            return Err(Error::DimensionMismatch(
                "configs, h_meas and pf_known must be index-aligned".into(),
            ));
        }
        for h in &self.h_meas {
            if h.nrows() != self.rx.len() || h.ncols() != self.tx.len() {
                return Err(Error::DimensionMismatch(
                    "measured H block does not match the tx/rx sets".into(),
                ));
            }
        }
        Ok(())
    }

    /// Keep only the first `p` realizations.
    pub fn prefix(&self, p: usize) -> MeasurementCampaign {
        MeasurementCampaign {
            configs: self.configs[..p].to_vec(),
            tx: self.tx.clone(),
            rx: self.rx.clone(),
            h_meas: self.h_meas[..p].to_vec(),
            pf_known: self.pf_known[..p].to_vec(),
            snr_db: self.snr_db,
        }
    }
}

fn mean_entry_power(ms: &[CMatrix]) -> f64 {
    let mut acc = 0.0;
    let mut n = 0usize;
    for m in ms {
        for z in m.iter() {
            acc += z.norm_sqr();
            n += 1;
        }
    }
    if n == 0 {
        0.0
    } else {
        acc / n as f64
    }
}

fn complex_noise(rng: &mut ChaCha12Rng, var: f64) -> C64 {
    let s = (var / 2.0).sqrt();
    let normal = StandardNormal;
    let re: f64 = normal.sample(rng);
    let im: f64 = normal.sample(rng);
    C64::new(s * re, s * im)
}

/// Simulate measurements of H for the given configuration series.
///
/// Measurement noise is circularly-symmetric white with per-entry variance
/// set so that the campaign-mean entry power of H over the noise variance
/// equals `10^(snr_db/10)`. The estimator's fixture knowledge is derived
/// from the OTA matrix plus white perturbation `ota_knowledge_error_db`
/// below its mean entry power.
pub fn simulate_campaign(
    scenario: &Scenario,
    configs: &[TLNConfiguration],
    tx: &[usize],
    rx: &[usize],
    tol: &Tolerances,
) -> Result<MeasurementCampaign> {
    scenario.validate(tol)?;
    let partition = &scenario.partition;
    let at_config = |index: usize, e: Error| Error::AtConfiguration {
        index,
        source: Box::new(e),
    };

    // Estimator's copy of the OTA fixture.
    let s_ota_known = match scenario.ota_knowledge_error_db {
        None => scenario.s_ota.clone(),
        Some(err_db) => {
            let mut rng = ChaCha12Rng::seed_from_u64(scenario.seed ^ 0x4f74_6145_7272_6f72);
            let power = mean_entry_power(std::slice::from_ref(&scenario.s_ota.entries));
            let var = power * 10f64.powf(-err_db / 10.0);
            let n = scenario.s_ota.n_ports();
            let e = CMatrix::from_fn(n, n, |_, _| complex_noise(&mut rng, var));
            ScatteringMatrix::new(&scenario.s_ota.entries + e)?
        }
    };

    let mut h_true = Vec::with_capacity(configs.len());
    let mut pf_known = Vec::with_capacity(configs.len());
    for (r, cfg) in configs.iter().enumerate() {
        let s_tln = synthesize_tln(cfg, &scenario.hw).map_err(|e| at_config(r, e))?;
        let mut pf = compose_pf(&scenario.s_ota, &s_tln, partition, tol).map_err(|e| at_config(r, e))?;
        pf.config_id = Some(cfg.to_token());
        let h = forward_model(&pf, &scenario.s_dut_true, tx, rx, tol).map_err(|e| at_config(r, e))?;
        h_true.push(h);
        let mut pf_k =
            compose_pf(&s_ota_known, &s_tln, partition, tol).map_err(|e| at_config(r, e))?;
        pf_k.config_id = Some(cfg.to_token());
        pf_known.push(pf_k);
    }

    let h_meas = match scenario.snr_db {
        None => h_true,
        Some(snr_db) => {
            let var = mean_entry_power(&h_true) * 10f64.powf(-snr_db / 10.0);
            let mut rng = ChaCha12Rng::seed_from_u64(scenario.seed ^ 0x6d65_6173_4e6f_6973);
            h_true
                .into_iter()
                .map(|h| {
                    let (nr, nc) = h.shape();
                    h + CMatrix::from_fn(nr, nc, |_, _| complex_noise(&mut rng, var))
                })
                .collect()
        }
    };

    let campaign = MeasurementCampaign {
        configs: configs.to_vec(),
        tx: tx.to_vec(),
        rx: rx.to_vec(),
        h_meas,
        pf_known,
        snr_db: scenario.snr_db,
    };
    campaign.validate()?;
    Ok(campaign)
}

/// Restrict a campaign to a subset of its TX and RX ports. Valid because
/// scattering parameters are referenced to matched terminations, so unused
/// accessible ports drop out by row/column restriction.
pub fn extract_submatrix_campaign(
    full: &MeasurementCampaign,
    tx_sub: &[usize],
    rx_sub: &[usize],
) -> Result<MeasurementCampaign> {
    let tx_pos: Vec<usize> = tx_sub
        .iter()
        .map(|t| {
            full.tx
                .iter()
                .position(|x| x == t)
                .ok_or_else(|| Error::InvalidArgument(format!("tx port {t} not in campaign")))
        })
        .collect::<Result<_>>()?;
    let rx_pos: Vec<usize> = rx_sub
        .iter()
        .map(|r| {
            full.rx
                .iter()
                .position(|x| x == r)
                .ok_or_else(|| Error::InvalidArgument(format!("rx port {r} not in campaign")))
        })
        .collect::<Result<_>>()?;
    let h_meas = full
        .h_meas
        .iter()
        .map(|h| CMatrix::from_fn(rx_pos.len(), tx_pos.len(), |i, j| h[(rx_pos[i], tx_pos[j])]))
        .collect();
    Ok(MeasurementCampaign {
        configs: full.configs.clone(),
        tx: tx_sub.to_vec(),
        rx: rx_sub.to_vec(),
        h_meas,
        pf_known: full.pf_known.clone(),
        snr_db: full.snr_db,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tln::step2_series;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn noise_free_campaign(n_a: usize, n_s: usize, p: usize, seed: u64) -> (Scenario, MeasurementCampaign) {
        let scenario = Scenario::synthetic(n_a, n_s, seed).unwrap();
        let configs = step2_series(n_s, p, seed, &tol()).unwrap();
        let tx = scenario.partition.tx.clone();
        let rx = scenario.partition.rx.clone();
        let c = simulate_campaign(&scenario, &configs, &tx, &rx, &tol()).unwrap();
        (scenario, c)
    }

    #[test]
    fn noise_free_measurements_equal_forward_model() {
        let (scenario, c) = noise_free_campaign(4, 3, 5, 1);
        for r in 0..c.p() {
            let s_tln = synthesize_tln(&c.configs[r], &scenario.hw).unwrap();
            let pf = compose_pf(&scenario.s_ota, &s_tln, &scenario.partition, &tol()).unwrap();
            let h = forward_model(&pf, &scenario.s_dut_true, &c.tx, &c.rx, &tol()).unwrap();
            assert_eq!(c.h_meas[r], h);
            // fixture knowledge is exact without a knowledge-error channel
            assert_eq!(c.pf_known[r].s_ss, pf.s_ss);
        }
    }

    #[test]
    fn empirical_snr_matches_requested() {
        let mut scenario = Scenario::synthetic(8, 4, 3).unwrap();
        scenario.snr_db = Some(62.3);
        let configs = step2_series(4, 70, 3, &tol()).unwrap();
        let tx = scenario.partition.tx.clone();
        let rx = scenario.partition.rx.clone();
        let noisy = simulate_campaign(&scenario, &configs, &tx, &rx, &tol()).unwrap();
        let mut clean = scenario.clone();
        clean.snr_db = None;
        let clean = simulate_campaign(&clean, &configs, &tx, &rx, &tol()).unwrap();

        let mut sig = 0.0;
        let mut noise = 0.0;
        let mut n = 0usize;
        for (hm, ht) in noisy.h_meas.iter().zip(clean.h_meas.iter()) {
            for (zm, zt) in hm.iter().zip(ht.iter()) {
                sig += zt.norm_sqr();
                noise += (zm - zt).norm_sqr();
                n += 1;
            }
        }
        assert!(n >= 1000, "need >= 1000 entries, got {n}");
        let snr_emp = 10.0 * (sig / noise).log10();
        assert!((snr_emp - 62.3).abs() < 0.5, "empirical SNR {snr_emp}");
    }

    #[test]
    fn siso_campaign_shapes() {
        let scenario = Scenario::synthetic(2, 4, 5).unwrap();
        let configs = step2_series(4, 7, 5, &tol()).unwrap();
        let c = simulate_campaign(&scenario, &configs, &[0], &[1], &tol()).unwrap();
        assert_eq!(c.m(), 1);
        for h in &c.h_meas {
            assert_eq!(h.shape(), (1, 1));
        }
        assert_eq!(c.p(), 7);
    }

    #[test]
    fn campaign_is_deterministic() {
        let mut scenario = Scenario::synthetic(4, 3, 9).unwrap();
        scenario.snr_db = Some(40.0);
        scenario.ota_knowledge_error_db = Some(30.0);
        let configs = step2_series(3, 6, 9, &tol()).unwrap();
        let tx = scenario.partition.tx.clone();
        let rx = scenario.partition.rx.clone();
        let a = simulate_campaign(&scenario, &configs, &tx, &rx, &tol()).unwrap();
        let b = simulate_campaign(&scenario, &configs, &tx, &rx, &tol()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn knowledge_error_perturbs_fixture_knowledge_only() {
        let mut scenario = Scenario::synthetic(4, 3, 11).unwrap();
        scenario.ota_knowledge_error_db = Some(46.5);
        let configs = step2_series(3, 4, 11, &tol()).unwrap();
        let tx = scenario.partition.tx.clone();
        let rx = scenario.partition.rx.clone();
        let c = simulate_campaign(&scenario, &configs, &tx, &rx, &tol()).unwrap();
        let mut exact = scenario.clone();
        exact.ota_knowledge_error_db = None;
        let e = simulate_campaign(&exact, &configs, &tx, &rx, &tol()).unwrap();
        assert_eq!(c.h_meas, e.h_meas);
        assert_ne!(c.pf_known[0].s_aa, e.pf_known[0].s_aa);
        let d = (&c.pf_known[0].s_aa - &e.pf_known[0].s_aa).norm();
        assert!(d > 0.0 && d < 0.1, "perturbation magnitude {d}");
    }

    #[test]
    fn restrict_commutes_with_simulate() {
        let scenario = Scenario::synthetic(8, 4, 13).unwrap();
        let configs = step2_series(4, 5, 13, &tol()).unwrap();
        let tx = scenario.partition.tx.clone();
        let rx = scenario.partition.rx.clone();
        let full = simulate_campaign(&scenario, &configs, &tx, &rx, &tol()).unwrap();

        let tx_sub = vec![tx[1]];
        let rx_sub = vec![rx[2]];
        let restricted = extract_submatrix_campaign(&full, &tx_sub, &rx_sub).unwrap();
        let direct = simulate_campaign(&scenario, &configs, &tx_sub, &rx_sub, &tol()).unwrap();
        assert_eq!(restricted.h_meas, direct.h_meas);
        // scalar entry check
        for r in 0..full.p() {
            assert_eq!(restricted.h_meas[r][(0, 0)], full.h_meas[r][(2, 1)]);
        }
        // identity restriction
        let same = extract_submatrix_campaign(&full, &tx, &rx).unwrap();
        assert_eq!(same.h_meas, full.h_meas);
        // out-of-range index
        assert!(extract_submatrix_campaign(&full, &[99], &rx_sub).is_err());
    }

    #[test]
    fn mp_accounting() {
        let (_, c) = noise_free_campaign(6, 3, 4, 21);
        let y_len: usize = c.h_meas.iter().map(|h| h.len()).sum();
        assert_eq!(y_len, c.m() * c.p());
    }
}
