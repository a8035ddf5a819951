//! Tunable load network model: per-port terminations, synthesis of the TLN's
//! scattering matrix from a configuration, closed-form configuration counts,
//! exhaustive enumeration, and the two configuration series used for fixture
//! characterization and DUT measurement.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::network::{C64, CMatrix, ScatteringMatrix, Tolerances};

/// Termination of one OTA-side TLN port. Coupled loads join adjacent ports:
/// `CoupledLeft` at port i is always paired with `CoupledRight` at port i+1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Termination {
    LoadA,
    LoadB,
    LoadC,
    CoupledLeft,
    CoupledRight,
    Thru,
}

impl Termination {
    pub fn token(self) -> char {
        match self {
            Termination::LoadA => 'A',
            Termination::LoadB => 'B',
            Termination::LoadC => 'C',
            Termination::CoupledLeft => '(',
            Termination::CoupledRight => ')',
            Termination::Thru => 'T',
        }
    }

    pub fn from_token(c: char) -> Result<Self> {
        Ok(match c {
            'A' => Termination::LoadA,
            'B' => Termination::LoadB,
            'C' => Termination::LoadC,
            '(' => Termination::CoupledLeft,
            ')' => Termination::CoupledRight,
            'T' => Termination::Thru,
            other => {
                return Err(Error::InvalidConfiguration(format!(
                    "unknown termination token '{other}'"
                )))
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Step1,
    Step2,
}

/// One row of the configuration matrix: the termination of every OTA-side
/// TLN port.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TLNConfiguration {
    pub terminations: Vec<Termination>,
    pub stage: Stage,
}

impl TLNConfiguration {
    pub fn new(terminations: Vec<Termination>, stage: Stage) -> Result<Self> {
        let cfg = TLNConfiguration { terminations, stage };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn all_thru(n_s: usize) -> Self {
        TLNConfiguration {
            terminations: vec![Termination::Thru; n_s],
            stage: Stage::Step2,
        }
    }

    pub fn n_s(&self) -> usize {
        self.terminations.len()
    }

    pub fn has_thru(&self) -> bool {
        self.terminations.contains(&Termination::Thru)
    }

    pub fn validate(&self) -> Result<()> {
        let t = &self.terminations;
        for i in 0..t.len() {
            match t[i] {
                Termination::CoupledLeft => {
                    if i + 1 >= t.len() || t[i + 1] != Termination::CoupledRight {
                        return Err(Error::InvalidConfiguration(format!(
                            "coupled-left at port {i} has no matching coupled-right at port {}",
                            i + 1
                        )));
                    }
                }
                Termination::CoupledRight => {
                    if i == 0 || t[i - 1] != Termination::CoupledLeft {
                        return Err(Error::InvalidConfiguration(format!(
                            "coupled-right at port {i} has no matching coupled-left at port {}",
                            i.wrapping_sub(1)
                        )));
                    }
                }
                _ => {}
            }
        }
        match self.stage {
            Stage::Step1 if self.has_thru() => Err(Error::InvalidConfiguration(
                "step-1 configuration must not contain a thru connection".into(),
            )),
            Stage::Step2 if !self.has_thru() => Err(Error::InvalidConfiguration(
                "step-2 configuration must contain at least one thru connection".into(),
            )),
            _ => Ok(()),
        }
    }

    /// Compact text token, one character per port, e.g. `"AT()B"`.
    pub fn to_token(&self) -> String {
        self.terminations.iter().map(|t| t.token()).collect()
    }

    pub fn from_token(token: &str, stage: Stage) -> Result<Self> {
        let terminations = token
            .chars()
            .map(Termination::from_token)
            .collect::<Result<Vec<_>>>()?;
        TLNConfiguration::new(terminations, stage)
    }
}

/// Parametric model of the TLN hardware as seen from its ports. The loads
/// seen at the OTA side are deliberately not calibration standards.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TLNHardwareModel {
    pub gamma_a: C64,
    pub gamma_b: C64,
    pub gamma_c: C64,
    pub thru_s21: C64,
    pub thru_s11: C64,
    pub thru_s22: C64,
    pub coupled_s21: C64,
    pub coupled_s11: C64,
    /// Reflection seen at a DUT-side port whose switch is not set to thru.
    pub idle_dut_reflection: C64,
}

impl Default for TLNHardwareModel {
    fn default() -> Self {
        TLNHardwareModel {
            gamma_a: C64::from_polar(0.9, 0.3),
            gamma_b: -C64::from_polar(0.85, 0.1),
            gamma_c: C64::from_polar(0.05, 1.0),
            thru_s21: C64::from_polar(0.95, -0.7),
            thru_s11: C64::new(0.05, 0.0),
            thru_s22: C64::new(0.05, 0.0),
            coupled_s21: C64::from_polar(0.9, -0.4),
            coupled_s11: C64::new(0.1, 0.0),
            idle_dut_reflection: C64::from_polar(0.9, 0.2),
        }
    }
}

impl TLNHardwareModel {
    /// Ideal hardware: lossless thru and coupled paths, matched otherwise.
    pub fn ideal() -> Self {
        TLNHardwareModel {
            gamma_a: C64::new(-1.0, 0.0),
            gamma_b: C64::new(1.0, 0.0),
            gamma_c: C64::new(0.0, 0.0),
            thru_s21: C64::new(1.0, 0.0),
            thru_s11: C64::new(0.0, 0.0),
            thru_s22: C64::new(0.0, 0.0),
            coupled_s21: C64::new(1.0, 0.0),
            coupled_s11: C64::new(0.0, 0.0),
            idle_dut_reflection: C64::new(0.0, 0.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.gamma_a == self.gamma_b || self.gamma_a == self.gamma_c || self.gamma_b == self.gamma_c
        {
            return Err(Error::InvalidArgument(
                "the three individual loads must be pairwise distinct".into(),
            ));
        }
        for (name, v) in [
            ("gamma_a", self.gamma_a),
            ("gamma_b", self.gamma_b),
            ("gamma_c", self.gamma_c),
            ("thru_s21", self.thru_s21),
            ("coupled_s21", self.coupled_s21),
        ] {
            if v.norm() > 1.0 + 1e-12 {
                return Err(Error::InvalidArgument(format!("|{name}| must be <= 1")));
            }
        }
        Ok(())
    }

    fn load(&self, t: Termination) -> C64 {
        match t {
            Termination::LoadA => self.gamma_a,
            Termination::LoadB => self.gamma_b,
            Termination::LoadC => self.gamma_c,
            _ => unreachable!("load() called for a non-load termination"),
        }
    }
}

/// Assemble the 2*N_S-port TLN scattering matrix for one configuration.
/// Ports `0..n_s` face the OTA fixture, ports `n_s..2*n_s` face the DUT.
pub fn synthesize_tln(config: &TLNConfiguration, hw: &TLNHardwareModel) -> Result<ScatteringMatrix> {
    config.validate()?;
    let n = config.n_s();
    let mut m = CMatrix::zeros(2 * n, 2 * n);
    for (i, &t) in config.terminations.iter().enumerate() {
        match t {
            Termination::LoadA | Termination::LoadB | Termination::LoadC => {
                m[(i, i)] = hw.load(t);
                m[(n + i, n + i)] = hw.idle_dut_reflection;
            }
            Termination::Thru => {
                m[(i, i)] = hw.thru_s11;
                m[(i, n + i)] = hw.thru_s21;
                m[(n + i, i)] = hw.thru_s21;
                m[(n + i, n + i)] = hw.thru_s22;
            }
            Termination::CoupledLeft => {
                m[(i, i)] = hw.coupled_s11;
                m[(i + 1, i + 1)] = hw.coupled_s11;
                m[(i, i + 1)] = hw.coupled_s21;
                m[(i + 1, i)] = hw.coupled_s21;
                m[(n + i, n + i)] = hw.idle_dut_reflection;
                m[(n + i + 1, n + i + 1)] = hw.idle_dut_reflection;
            }
            Termination::CoupledRight => {} // handled by its left partner
        }
    }
    ScatteringMatrix::new(m)
}

fn binomial(n: u128, k: u128) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul(n - i)?;
        acc /= i + 1;
    }
    Some(acc)
}

fn checked_pow(base: u128, exp: u32) -> Option<u128> {
    base.checked_pow(exp)
}

/// Number of step-1 configurations: sum over r coupled pairs of
/// C(n_s - r, r) * 3^(n_s - 2r).
pub fn count_step1_configs(n_s: usize) -> Result<u128> {
    config_count(n_s, 3)
}

/// Number of step-2 configurations: sum over r coupled pairs of
/// C(n_s - r, r) * (4^(n_s - 2r) - 3^(n_s - 2r)).
pub fn count_step2_configs(n_s: usize) -> Result<u128> {
    let all = config_count(n_s, 4)?;
    Ok(all - config_count(n_s, 3)?)
}

fn config_count(n_s: usize, letters: u128) -> Result<u128> {
    if n_s == 0 {
        return Err(Error::InvalidArgument("n_s must be at least 1".into()));
    }
    let n = n_s as u128;
    let mut total: u128 = 0;
    for r in 0..=(n / 2) {
        let term = binomial(n - r, r)
            .zip(checked_pow(letters, (n - 2 * r) as u32))
            .and_then(|(b, p)| b.checked_mul(p))
            .ok_or_else(|| Error::InvalidArgument("configuration count overflows u128".into()))?;
        total = total
            .checked_add(term)
            .ok_or_else(|| Error::InvalidArgument("configuration count overflows u128".into()))?;
    }
    Ok(total)
}

/// Same counts via the transfer recursion f(n) = k f(n-1) + f(n-2); used by
/// the unranking sampler.
fn count_rec(n: usize, letters: u128) -> u128 {
    let (mut prev, mut cur) = (1u128, letters);
    if n == 0 {
        return 1;
    }
    for _ in 1..n {
        let next = letters * cur + prev;
        prev = cur;
        cur = next;
    }
    cur
}

const STEP1_LETTERS: [Termination; 3] = [Termination::LoadA, Termination::LoadB, Termination::LoadC];
const STEP2_LETTERS: [Termination; 4] = [
    Termination::LoadA,
    Termination::LoadB,
    Termination::LoadC,
    Termination::Thru,
];

/// All admissible configurations of the given stage, in canonical
/// (lexicographic) order. Errors if the count exceeds the enumeration cap.
pub fn enumerate_configs(n_s: usize, stage: Stage, tol: &Tolerances) -> Result<Vec<TLNConfiguration>> {
    let count = match stage {
        Stage::Step1 => count_step1_configs(n_s)?,
        Stage::Step2 => count_step2_configs(n_s)?,
    };
    if count > tol.enumeration_cap {
        return Err(Error::EnumerationCapExceeded {
            count,
            cap: tol.enumeration_cap,
        });
    }
    let letters: &[Termination] = match stage {
        Stage::Step1 => &STEP1_LETTERS,
        Stage::Step2 => &STEP2_LETTERS,
    };
    let mut out = Vec::new();
    let mut prefix = Vec::with_capacity(n_s);
    enumerate_rec(n_s, letters, &mut prefix, &mut out);
    let configs = out
        .into_iter()
        .filter(|t| match stage {
            Stage::Step1 => true,
            Stage::Step2 => t.contains(&Termination::Thru),
        })
        .map(|terminations| TLNConfiguration { terminations, stage })
        .collect::<Vec<_>>();
    debug_assert_eq!(configs.len() as u128, count);
    Ok(configs)
}

fn enumerate_rec(
    remaining: usize,
    letters: &[Termination],
    prefix: &mut Vec<Termination>,
    out: &mut Vec<Vec<Termination>>,
) {
    if remaining == 0 {
        out.push(prefix.clone());
        return;
    }
    for &l in letters {
        prefix.push(l);
        enumerate_rec(remaining - 1, letters, prefix, out);
        prefix.pop();
    }
    if remaining >= 2 {
        prefix.push(Termination::CoupledLeft);
        prefix.push(Termination::CoupledRight);
        enumerate_rec(remaining - 2, letters, prefix, out);
        prefix.pop();
        prefix.pop();
    }
}

/// Unrank the `rank`-th step-2 configuration (canonical order over the
/// choice tree: A, B, C, T, coupled pair) among those containing >= 1 thru.
fn unrank_step2(n_s: usize, mut rank: u128) -> Vec<Termination> {
    let mut terminations = Vec::with_capacity(n_s);
    let mut has_thru = false;
    let mut rem = n_s;
    while rem > 0 {
        let completions = |len: usize, thru_seen: bool| -> u128 {
            if thru_seen {
                count_rec(len, 4)
            } else {
                count_rec(len, 4) - count_rec(len, 3)
            }
        };
        let mut placed = false;
        for &l in &STEP2_LETTERS {
            let thru_after = has_thru || l == Termination::Thru;
            let c = completions(rem - 1, thru_after);
            if rank < c {
                terminations.push(l);
                has_thru = thru_after;
                rem -= 1;
                placed = true;
                break;
            }
            rank -= c;
        }
        if placed {
            continue;
        }
        // must be a coupled pair
        debug_assert!(rem >= 2);
        terminations.push(Termination::CoupledLeft);
        terminations.push(Termination::CoupledRight);
        rem -= 2;
    }
    debug_assert_eq!(rank, 0);
    terminations
}

/// Step-1 series: duplicate-free, covers every individual load on every port
/// and every adjacent coupled pair at least once; no thru anywhere.
pub fn step1_series(n_s: usize, seed: u64) -> Result<Vec<TLNConfiguration>> {
    if n_s == 0 {
        return Err(Error::InvalidArgument("n_s must be at least 1".into()));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut series: Vec<TLNConfiguration> = Vec::new();
    let mut seen: HashSet<Vec<Termination>> = HashSet::new();

    for load in STEP1_LETTERS {
        let cfg = TLNConfiguration::new(vec![load; n_s], Stage::Step1)?;
        seen.insert(cfg.terminations.clone());
        series.push(cfg);
    }

    // Two interleaved matchings cover every adjacent pair; uncovered ports
    // get random individual loads, rerolled on the off chance of a repeat.
    for offset in 0..2usize.min(n_s.saturating_sub(1)) {
        let pair_starts: Vec<usize> = (offset..n_s.saturating_sub(1)).step_by(2).collect();
        if pair_starts.is_empty() {
            continue;
        }
        loop {
            let mut t = vec![Termination::LoadA; n_s];
            let mut in_pair = vec![false; n_s];
            for &i in &pair_starts {
                t[i] = Termination::CoupledLeft;
                t[i + 1] = Termination::CoupledRight;
                in_pair[i] = true;
                in_pair[i + 1] = true;
            }
            for i in 0..n_s {
                if !in_pair[i] {
                    t[i] = STEP1_LETTERS[rng.random_range(0..3)];
                }
            }
            if seen.insert(t.clone()) {
                series.push(TLNConfiguration::new(t, Stage::Step1)?);
                break;
            }
        }
    }
    Ok(series)
}

/// Step-2 series: the all-thru configuration first, then `p - 1` further
/// configurations drawn uniformly without replacement from the remaining
/// step-2 set. Deterministic given `seed`.
pub fn step2_series(n_s: usize, p: usize, seed: u64, tol: &Tolerances) -> Result<Vec<TLNConfiguration>> {
    if p == 0 {
        return Err(Error::InvalidArgument("p must be at least 1".into()));
    }
    let count = count_step2_configs(n_s)?;
    if p as u128 > count {
        return Err(Error::InvalidArgument(format!(
            "p = {p} exceeds the {count} distinct step-2 configurations for n_s = {n_s}"
        )));
    }
    let all_thru = TLNConfiguration::all_thru(n_s);
    let mut series = vec![all_thru.clone()];
    if p == 1 {
        return Ok(series);
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    if count <= tol.enumeration_cap {
        let mut pool: Vec<TLNConfiguration> = enumerate_configs(n_s, Stage::Step2, tol)?
            .into_iter()
            .filter(|c| *c != all_thru)
            .collect();
        pool.shuffle(&mut rng);
        series.extend(pool.into_iter().take(p - 1));
    } else {
        // Sample distinct ranks uniformly; unrank each into a configuration.
        let mut taken: HashSet<u128> = HashSet::new();
        let all_thru_terms = all_thru.terminations.clone();
        while series.len() < p {
            let rank = rng.random_range(0..count);
            if !taken.insert(rank) {
                continue;
            }
            let t = unrank_step2(n_s, rank);
            if t == all_thru_terms {
                continue;
            }
            series.push(TLNConfiguration {
                terminations: t,
                stage: Stage::Step2,
            });
        }
    }
    Ok(series)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    /// Brute-force oracle: generate every string over the six tokens and
    /// keep the structurally valid ones.
    fn brute_force_count(n_s: usize, stage: Stage) -> usize {
        let tokens = ['A', 'B', 'C', 'T', '(', ')'];
        let mut count = 0usize;
        let total = tokens.len().pow(n_s as u32);
        for idx in 0..total {
            let mut x = idx;
            let s: String = (0..n_s)
                .map(|_| {
                    let c = tokens[x % tokens.len()];
                    x /= tokens.len();
                    c
                })
                .collect();
            let chars: Vec<char> = s.chars().collect();
            let mut valid = true;
            for i in 0..chars.len() {
                match chars[i] {
                    '(' => {
                        if i + 1 >= chars.len() || chars[i + 1] != ')' {
                            valid = false;
                        }
                    }
                    ')' => {
                        if i == 0 || chars[i - 1] != '(' {
                            valid = false;
                        }
                    }
                    _ => {}
                }
            }
            let has_thru = chars.contains(&'T');
            let stage_ok = match stage {
                Stage::Step1 => !has_thru,
                Stage::Step2 => has_thru,
            };
            if valid && stage_ok {
                count += 1;
            }
        }
        count
    }

    #[test]
    fn counts_match_brute_force() {
        let expected1 = [3u128, 10, 33, 109];
        let expected2 = [1u128, 7, 39, 196];
        for n in 1..=6usize {
            let c1 = count_step1_configs(n).unwrap();
            let c2 = count_step2_configs(n).unwrap();
            assert_eq!(c1, brute_force_count(n, Stage::Step1) as u128, "step1 n={n}");
            assert_eq!(c2, brute_force_count(n, Stage::Step2) as u128, "step2 n={n}");
            if n <= 4 {
                assert_eq!(c1, expected1[n - 1]);
                assert_eq!(c2, expected2[n - 1]);
            }
        }
    }

    #[test]
    fn counts_match_transfer_recursion() {
        for n in 1..=12usize {
            assert_eq!(count_step1_configs(n).unwrap(), count_rec(n, 3));
            assert_eq!(
                count_step2_configs(n).unwrap(),
                count_rec(n, 4) - count_rec(n, 3)
            );
        }
    }

    #[test]
    fn enumeration_matches_counts_and_is_duplicate_free() {
        for n in 1..=6usize {
            for stage in [Stage::Step1, Stage::Step2] {
                let configs = enumerate_configs(n, stage, &tol()).unwrap();
                let count = match stage {
                    Stage::Step1 => count_step1_configs(n).unwrap(),
                    Stage::Step2 => count_step2_configs(n).unwrap(),
                };
                assert_eq!(configs.len() as u128, count);
                let set: HashSet<_> = configs.iter().map(|c| c.terminations.clone()).collect();
                assert_eq!(set.len(), configs.len(), "duplicates at n={n}");
                for c in &configs {
                    c.validate().unwrap();
                }
            }
        }
    }

    #[test]
    fn enumeration_cap_is_enforced() {
        let mut t = tol();
        t.enumeration_cap = 10;
        assert!(matches!(
            enumerate_configs(4, Stage::Step2, &t),
            Err(Error::EnumerationCapExceeded { .. })
        ));
    }

    #[test]
    fn unranking_agrees_with_enumeration() {
        for n in [2usize, 3, 4, 5] {
            let mut unranked: Vec<Vec<Termination>> = (0..count_step2_configs(n).unwrap())
                .map(|r| unrank_step2(n, r))
                .collect();
            let mut enumerated: Vec<Vec<Termination>> = enumerate_configs(n, Stage::Step2, &tol())
                .unwrap()
                .into_iter()
                .map(|c| c.terminations)
                .collect();
            unranked.sort();
            enumerated.sort();
            assert_eq!(unranked, enumerated);
        }
    }

    #[test]
    fn token_round_trip() {
        let cfg = TLNConfiguration::from_token("AT()B", Stage::Step2).unwrap();
        assert_eq!(cfg.to_token(), "AT()B");
        assert!(TLNConfiguration::from_token("A(", Stage::Step1).is_err());
        assert!(TLNConfiguration::from_token(")A", Stage::Step1).is_err());
        assert!(TLNConfiguration::from_token("AB", Stage::Step2).is_err());
        assert!(TLNConfiguration::from_token("AT", Stage::Step1).is_err());
    }

    #[test]
    fn synthesize_all_thru_ideal_is_interconnect() {
        let cfg = TLNConfiguration::all_thru(3);
        let s = synthesize_tln(&cfg, &TLNHardwareModel::ideal()).unwrap();
        for i in 0..3 {
            for j in 0..6 {
                let expect = if j == i + 3 { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
                assert_eq!(s.entries[(i, j)], expect);
                assert_eq!(s.entries[(j, i)], expect);
            }
        }
    }

    #[test]
    fn synthesize_all_load_a_is_diagonal() {
        let mut hw = TLNHardwareModel::default();
        hw.gamma_a = C64::new(-1.0, 0.0);
        hw.idle_dut_reflection = C64::new(1.0, 0.0);
        let cfg = TLNConfiguration::new(vec![Termination::LoadA; 2], Stage::Step1).unwrap();
        let s = synthesize_tln(&cfg, &hw).unwrap();
        let mut expect = CMatrix::zeros(4, 4);
        expect[(0, 0)] = C64::new(-1.0, 0.0);
        expect[(1, 1)] = C64::new(-1.0, 0.0);
        expect[(2, 2)] = C64::new(1.0, 0.0);
        expect[(3, 3)] = C64::new(1.0, 0.0);
        assert_eq!(s.entries, expect);
    }

    #[test]
    fn synthesize_zero_pattern_matches_configuration() {
        let cfg = TLNConfiguration::from_token("()TB", Stage::Step2).unwrap();
        let hw = TLNHardwareModel::default();
        let s = synthesize_tln(&cfg, &hw).unwrap();
        let n = 4;
        assert!(s.asymmetry() < 1e-15);
        assert!(s.is_passive(&tol()));
        for i in 0..2 * n {
            for j in 0..2 * n {
                if i == j {
                    continue;
                }
                let coupled = matches!(
                    (i, j),
                    (0, 1) | (1, 0) // coupled pair on ports 0,1
                        | (2, 6) | (6, 2) // thru on port 2
                );
                if !coupled {
                    assert_eq!(s.entries[(i, j)], C64::new(0.0, 0.0), "({i},{j})");
                }
            }
        }
    }

    #[test]
    fn step1_series_covers_everything() {
        for n in [1usize, 2, 4, 5] {
            let series = step1_series(n, 9).unwrap();
            let set: HashSet<_> = series.iter().map(|c| c.terminations.clone()).collect();
            assert_eq!(set.len(), series.len(), "series has duplicates");
            for cfg in &series {
                cfg.validate().unwrap();
                assert!(!cfg.has_thru());
            }
            for port in 0..n {
                for load in STEP1_LETTERS {
                    assert!(
                        series.iter().any(|c| c.terminations[port] == load),
                        "port {port} never sees {load:?}"
                    );
                }
            }
            for i in 0..n.saturating_sub(1) {
                assert!(
                    series.iter().any(|c| c.terminations[i] == Termination::CoupledLeft
                        && c.terminations[i + 1] == Termination::CoupledRight),
                    "pair ({i},{}) never used",
                    i + 1
                );
            }
            if n == 1 {
                assert_eq!(series.len(), 3);
            }
            if n == 4 {
                assert!(series.len() >= 5);
            }
        }
        assert_eq!(step1_series(3, 5).unwrap(), step1_series(3, 5).unwrap());
    }

    #[test]
    fn step2_series_contract() {
        let s = step2_series(4, 30, 17, &tol()).unwrap();
        assert_eq!(s.len(), 30);
        assert_eq!(s[0], TLNConfiguration::all_thru(4));
        let set: HashSet<_> = s.iter().map(|c| c.terminations.clone()).collect();
        assert_eq!(set.len(), 30);
        for cfg in &s {
            cfg.validate().unwrap();
        }
        assert_eq!(s, step2_series(4, 30, 17, &tol()).unwrap());

        assert_eq!(step2_series(1, 1, 0, &tol()).unwrap(), vec![TLNConfiguration::all_thru(1)]);
        assert!(step2_series(1, 2, 0, &tol()).is_err());
        assert_eq!(step2_series(4, 1, 3, &tol()).unwrap().len(), 1);
    }

    #[test]
    fn step2_series_via_unranking_matches_contract() {
        // Force the rank-sampling path by shrinking the cap.
        let mut t = tol();
        t.enumeration_cap = 10;
        let s = step2_series(4, 25, 5, &t).unwrap();
        assert_eq!(s.len(), 25);
        assert_eq!(s[0], TLNConfiguration::all_thru(4));
        let set: HashSet<_> = s.iter().map(|c| c.terminations.clone()).collect();
        assert_eq!(set.len(), 25);
        for cfg in &s {
            cfg.validate().unwrap();
        }
    }
}
