//! Persistence and interchange: Touchstone v1.x S-parameter files, campaign
//! files, and estimate reports.
//!
//! Campaign files are versioned JSON with complex numbers written as
//! explicit `[re, im]` pairs; save followed by load is lossless at full
//! binary-float precision.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::campaign::{MeasurementCampaign, Scenario};
use crate::error::{Error, Result};
use crate::estimator::EstimateReport;
use crate::network::{C64, CMatrix, PFRealization, PortPartition, ScatteringMatrix};
use crate::tln::{Stage, TLNConfiguration, TLNHardwareModel};

pub const CAMPAIGN_SCHEMA_VERSION: u64 = 1;

// ---------------------------------------------------------------------------
// Touchstone v1.x
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TouchstoneFormat {
    RI,
    MA,
    DB,
}

impl TouchstoneFormat {
    fn name(self) -> &'static str {
        match self {
            TouchstoneFormat::RI => "RI",
            TouchstoneFormat::MA => "MA",
            TouchstoneFormat::DB => "DB",
        }
    }

    fn decode(self, a: f64, b: f64) -> C64 {
        match self {
            TouchstoneFormat::RI => C64::new(a, b),
            TouchstoneFormat::MA => C64::from_polar(a, b.to_radians()),
            TouchstoneFormat::DB => C64::from_polar(10f64.powf(a / 20.0), b.to_radians()),
        }
    }

    fn encode(self, z: C64) -> (f64, f64) {
        match self {
            TouchstoneFormat::RI => (z.re, z.im),
            TouchstoneFormat::MA => (z.norm(), z.arg().to_degrees()),
            TouchstoneFormat::DB => (20.0 * z.norm().log10(), z.arg().to_degrees()),
        }
    }
}

/// A single-parameter-type Touchstone file: per-frequency full complex
/// scattering matrices, stored internally in rectangular (RI) form.
#[derive(Debug, Clone, PartialEq)]
pub struct TouchstoneDocument {
    pub n_ports: usize,
    /// (frequency in Hz, n_ports x n_ports matrix), strictly increasing.
    pub frequency_points: Vec<(f64, CMatrix)>,
    pub format: TouchstoneFormat,
    pub reference_impedance: f64,
    pub comments: Vec<String>,
}

fn perr(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column,
        message: message.into(),
    }
}

struct Token {
    text: String,
    line: usize,
    column: usize,
}

/// Data lines split into whitespace tokens, one entry per source line.
fn tokenize(text: &str) -> (Vec<Vec<Token>>, Vec<String>, Option<(usize, Vec<Token>)>) {
    let mut data_lines = Vec::new();
    let mut comments = Vec::new();
    let mut option_line = None;
    for (li, raw) in text.lines().enumerate() {
        let line_no = li + 1;
        let content = match raw.find('!') {
            Some(pos) => {
                let c = raw[pos + 1..].trim();
                if !c.is_empty() {
                    comments.push(c.to_string());
                }
                &raw[..pos]
            }
            None => raw,
        };
        let mut tokens = Vec::new();
        let mut col = 0;
        for piece in content.split_inclusive(char::is_whitespace) {
            let trimmed = piece.trim_end_matches(char::is_whitespace);
            if !trimmed.is_empty() {
                tokens.push(Token {
                    text: trimmed.to_string(),
                    line: line_no,
                    column: col + 1,
                });
            }
            col += piece.chars().count();
        }
        if tokens.is_empty() {
            continue;
        }
        if tokens[0].text.starts_with('#') {
            if option_line.is_none() {
                // "#GHz" with no space is legal: split the marker off
                if tokens[0].text.len() > 1 {
                    let rest = tokens[0].text[1..].to_string();
                    tokens[0].text = rest;
                } else {
                    tokens.remove(0);
                }
                option_line = Some((line_no, tokens));
            }
            continue;
        }
        data_lines.push(tokens);
    }
    (data_lines, comments, option_line)
}

fn parse_option_line(
    line_no: usize,
    tokens: &[Token],
) -> Result<(f64, TouchstoneFormat, f64)> {
    let mut freq_scale = 1e9;
    let mut format = TouchstoneFormat::MA;
    let mut z0 = 50.0;
    let mut i = 0;
    while i < tokens.len() {
        let t = &tokens[i];
        let upper = t.text.to_ascii_uppercase();
        match upper.as_str() {
            "HZ" => freq_scale = 1.0,
            "KHZ" => freq_scale = 1e3,
            "MHZ" => freq_scale = 1e6,
            "GHZ" => freq_scale = 1e9,
            "S" => {}
            "Y" | "Z" | "H" | "G" => {
                return Err(perr(
                    t.line,
                    t.column,
                    format!("only S-parameters are supported, found type {upper}"),
                ));
            }
            "RI" => format = TouchstoneFormat::RI,
            "MA" => format = TouchstoneFormat::MA,
            "DB" => format = TouchstoneFormat::DB,
            "R" => {
                i += 1;
                let rt = tokens.get(i).ok_or_else(|| {
                    perr(t.line, t.column, "R must be followed by a reference impedance")
                })?;
                z0 = rt.text.parse::<f64>().map_err(|_| {
                    perr(rt.line, rt.column, format!("invalid reference impedance `{}`", rt.text))
                })?;
            }
            _ => {
                return Err(perr(
                    t.line,
                    t.column,
                    format!("unrecognized option token `{}`", t.text),
                ));
            }
        }
        i += 1;
    }
    let _ = line_no;
    Ok((freq_scale, format, z0))
}

fn parse_number(t: &Token) -> Result<f64> {
    t.text
        .parse::<f64>()
        .map_err(|_| perr(t.line, t.column, format!("expected a number, found `{}`", t.text)))
}

/// Expected token count per data line for an n-port file, as a repeating
/// pattern over one frequency block. 1- and 2-port files put everything on
/// the frequency line; n >= 3 starts each matrix row on a new line and
/// wraps rows at four complex pairs per line.
fn block_pattern(n: usize) -> Vec<usize> {
    if n <= 2 {
        return vec![1 + 2 * n * n];
    }
    let mut pattern = Vec::new();
    for row in 0..n {
        let mut remaining = n;
        let mut first_chunk = true;
        while remaining > 0 {
            let chunk = remaining.min(4);
            let mut len = 2 * chunk;
            if row == 0 && first_chunk {
                len += 1;
            }
            pattern.push(len);
            remaining -= chunk;
            first_chunk = false;
        }
    }
    pattern
}

fn matches_layout(data_lines: &[Vec<Token>], n: usize) -> bool {
    let pattern = block_pattern(n);
    if data_lines.is_empty() || data_lines.len() % pattern.len() != 0 {
        return false;
    }
    data_lines
        .iter()
        .enumerate()
        .all(|(i, line)| line.len() == pattern[i % pattern.len()])
    }

/// Port count is not stored in a v1.x file; it is normally implied by the
/// `.sNp` extension. Infer it from the line layout, requiring a unique match.
fn infer_ports(data_lines: &[Vec<Token>]) -> Result<usize> {
    let candidates: Vec<usize> = (1..=8).filter(|&n| matches_layout(data_lines, n)).collect();
    match candidates.as_slice() {
        [n] => Ok(*n),
        [] => {
            let (l, c) = data_lines
                .first()
                .map(|t| (t[0].line, t[0].column))
                .unwrap_or((1, 1));
            Err(perr(l, c, "data layout does not match any port count in 1..=8"))
        }
        many => {
            let (l, c) = (data_lines[0][0].line, data_lines[0][0].column);
            Err(perr(
                l,
                c,
                format!("ambiguous data layout, could be any of {many:?} ports; use parse_touchstone_with_ports"),
            ))
        }
    }
}

pub fn parse_touchstone(text: &str) -> Result<TouchstoneDocument> {
    let (data_lines, _, _) = tokenize(text);
    let n = infer_ports(&data_lines)?;
    parse_touchstone_with_ports(text, n)
}

pub fn parse_touchstone_with_ports(text: &str, n_ports: usize) -> Result<TouchstoneDocument> {
    if n_ports == 0 {
        return Err(Error::InvalidArgument("n_ports must be positive".into()));
    }
    let (data_lines, comments, option_line) = tokenize(text);
    let (freq_scale, format, z0) = match &option_line {
        Some((line_no, tokens)) => parse_option_line(*line_no, tokens)?,
        None => (1e9, TouchstoneFormat::MA, 50.0),
    };
    if !matches_layout(&data_lines, n_ports) {
        let (l, c) = data_lines
            .first()
            .map(|t| (t[0].line, t[0].column))
            .unwrap_or((1, 1));
        return Err(perr(
            l,
            c,
            format!("data layout does not match a {n_ports}-port file"),
        ));
    }
    let pattern = block_pattern(n_ports);
    let mut frequency_points: Vec<(f64, CMatrix)> = Vec::new();
    for block in data_lines.chunks(pattern.len()) {
        let tokens: Vec<&Token> = block.iter().flatten().collect();
        let freq = parse_number(tokens[0])? * freq_scale;
        if let Some((last, _)) = frequency_points.last() {
            if freq <= *last {
                return Err(perr(
                    tokens[0].line,
                    tokens[0].column,
                    format!("frequencies must be strictly increasing ({freq} Hz after {last} Hz)"),
                ));
            }
        }
        let mut values = Vec::with_capacity(n_ports * n_ports);
        for pair in tokens[1..].chunks(2) {
            values.push(format.decode(parse_number(pair[0])?, parse_number(pair[1])?));
        }
        let mut m = CMatrix::zeros(n_ports, n_ports);
        if n_ports == 2 {
            // v1 2-port order is S11 S21 S12 S22
            m[(0, 0)] = values[0];
            m[(1, 0)] = values[1];
            m[(0, 1)] = values[2];
            m[(1, 1)] = values[3];
        } else {
            for i in 0..n_ports {
                for j in 0..n_ports {
                    m[(i, j)] = values[i * n_ports + j];
                }
            }
        }
        frequency_points.push((freq, m));
    }
    Ok(TouchstoneDocument {
        n_ports,
        frequency_points,
        format,
        reference_impedance: z0,
        comments,
    })
}

pub fn write_touchstone(doc: &TouchstoneDocument) -> Result<String> {
    let n = doc.n_ports;
    if n == 0 {
        return Err(Error::InvalidArgument("n_ports must be positive".into()));
    }
    for (f, m) in &doc.frequency_points {
        if !f.is_finite() || m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidArgument(
                "non-finite value in Touchstone document".into(),
            ));
        }
        if m.nrows() != n || m.ncols() != n {
            return Err(Error::DimensionMismatch(
                "frequency point matrix does not match n_ports".into(),
            ));
        }
    }
    let mut out = String::new();
    for c in &doc.comments {
        writeln!(out, "! {c}").unwrap();
    }
    writeln!(
        out,
        "# Hz S {} R {}",
        doc.format.name(),
        doc.reference_impedance
    )
    .unwrap();
    for (f, m) in &doc.frequency_points {
        let order: Vec<C64> = if n == 2 {
            vec![m[(0, 0)], m[(1, 0)], m[(0, 1)], m[(1, 1)]]
        } else {
            (0..n).flat_map(|i| (0..n).map(move |j| m[(i, j)])).collect()
        };
        if n <= 2 {
            write!(out, "{f}").unwrap();
            for z in &order {
                let (a, b) = doc.format.encode(*z);
                write!(out, " {a} {b}").unwrap();
            }
            writeln!(out).unwrap();
        } else {
            for (row, row_vals) in order.chunks(n).enumerate() {
                for (ci, chunk) in row_vals.chunks(4).enumerate() {
                    let mut line = String::new();
                    if row == 0 && ci == 0 {
                        write!(line, "{f}").unwrap();
                    }
                    for z in chunk {
                        let (a, b) = doc.format.encode(*z);
                        if !line.is_empty() {
                            line.push(' ');
                        }
                        write!(line, "{a} {b}").unwrap();
                    }
                    writeln!(out, "{line}").unwrap();
                }
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Campaign files
// ---------------------------------------------------------------------------

type Pair = [f64; 2];
type MatDto = Vec<Vec<Pair>>;

fn mat_to_dto(m: &CMatrix) -> MatDto {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

fn mat_from_dto(dto: &MatDto, what: &str) -> Result<CMatrix> {
    let rows = dto.len();
    let cols = dto.first().map(|r| r.len()).unwrap_or(0);
    if dto.iter().any(|r| r.len() != cols) {
        return Err(Error::DimensionMismatch(format!("{what}: ragged matrix rows")));
    }
    let mut m = CMatrix::zeros(rows, cols);
    for (i, row) in dto.iter().enumerate() {
        for (j, &[re, im]) in row.iter().enumerate() {
            if !re.is_finite() || !im.is_finite() {
                return Err(Error::InvalidArgument(format!("{what}: non-finite entry")));
            }
            m[(i, j)] = C64::new(re, im);
        }
    }
    Ok(m)
}

fn c_to_dto(z: C64) -> Pair {
    [z.re, z.im]
}

fn c_from_dto(p: Pair, what: &str) -> Result<C64> {
    if !p[0].is_finite() || !p[1].is_finite() {
        return Err(Error::InvalidArgument(format!("{what}: non-finite value")));
    }
    Ok(C64::new(p[0], p[1]))
}

#[derive(Serialize, Deserialize)]
struct ConfigDto {
    token: String,
    stage: String,
}

#[derive(Serialize, Deserialize)]
struct PFDto {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    config_id: Option<String>,
    s_aa: MatDto,
    s_as: MatDto,
    s_sa: MatDto,
    s_ss: MatDto,
}

#[derive(Serialize, Deserialize)]
struct HardwareDto {
    gamma_a: Pair,
    gamma_b: Pair,
    gamma_c: Pair,
    thru_s21: Pair,
    thru_s11: Pair,
    thru_s22: Pair,
    coupled_s21: Pair,
    coupled_s11: Pair,
    idle_dut_reflection: Pair,
}

#[derive(Serialize, Deserialize)]
struct PartitionDto {
    accessible: Vec<usize>,
    tx: Vec<usize>,
    rx: Vec<usize>,
    nda_side: Vec<usize>,
    tln_ota_side: Vec<usize>,
    dut_side: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct ScenarioDto {
    s_ota: MatDto,
    hw: HardwareDto,
    s_dut_true: MatDto,
    partition: PartitionDto,
    snr_db: Option<f64>,
    ota_knowledge_error_db: Option<f64>,
    seed: u64,
}

#[derive(Serialize, Deserialize)]
struct CampaignDto {
    schema_version: u64,
    n_s: usize,
    n_a: usize,
    tx: Vec<usize>,
    rx: Vec<usize>,
    snr_db: Option<f64>,
    configs: Vec<ConfigDto>,
    h_meas: Vec<MatDto>,
    pf_known: Vec<PFDto>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    scenario: Option<ScenarioDto>,
}

fn stage_name(stage: Stage) -> &'static str {
    match stage {
        Stage::Step1 => "step1",
        Stage::Step2 => "step2",
    }
}

fn stage_from_name(name: &str) -> Result<Stage> {
    match name {
        "step1" => Ok(Stage::Step1),
        "step2" => Ok(Stage::Step2),
        other => Err(Error::InvalidArgument(format!("unknown stage `{other}`"))),
    }
}

fn scenario_to_dto(s: &Scenario) -> ScenarioDto {
    ScenarioDto {
        s_ota: mat_to_dto(&s.s_ota.entries),
        hw: HardwareDto {
            gamma_a: c_to_dto(s.hw.gamma_a),
            gamma_b: c_to_dto(s.hw.gamma_b),
            gamma_c: c_to_dto(s.hw.gamma_c),
            thru_s21: c_to_dto(s.hw.thru_s21),
            thru_s11: c_to_dto(s.hw.thru_s11),
            thru_s22: c_to_dto(s.hw.thru_s22),
            coupled_s21: c_to_dto(s.hw.coupled_s21),
            coupled_s11: c_to_dto(s.hw.coupled_s11),
            idle_dut_reflection: c_to_dto(s.hw.idle_dut_reflection),
        },
        s_dut_true: mat_to_dto(&s.s_dut_true.entries),
        partition: PartitionDto {
            accessible: s.partition.accessible.clone(),
            tx: s.partition.tx.clone(),
            rx: s.partition.rx.clone(),
            nda_side: s.partition.nda_side.clone(),
            tln_ota_side: s.partition.tln_ota_side.clone(),
            dut_side: s.partition.dut_side.clone(),
        },
        snr_db: s.snr_db,
        ota_knowledge_error_db: s.ota_knowledge_error_db,
        seed: s.seed,
    }
}

fn scenario_from_dto(dto: &ScenarioDto) -> Result<Scenario> {
    let hw = TLNHardwareModel {
        gamma_a: c_from_dto(dto.hw.gamma_a, "hw.gamma_a")?,
        gamma_b: c_from_dto(dto.hw.gamma_b, "hw.gamma_b")?,
        gamma_c: c_from_dto(dto.hw.gamma_c, "hw.gamma_c")?,
        thru_s21: c_from_dto(dto.hw.thru_s21, "hw.thru_s21")?,
        thru_s11: c_from_dto(dto.hw.thru_s11, "hw.thru_s11")?,
        thru_s22: c_from_dto(dto.hw.thru_s22, "hw.thru_s22")?,
        coupled_s21: c_from_dto(dto.hw.coupled_s21, "hw.coupled_s21")?,
        coupled_s11: c_from_dto(dto.hw.coupled_s11, "hw.coupled_s11")?,
        idle_dut_reflection: c_from_dto(dto.hw.idle_dut_reflection, "hw.idle_dut_reflection")?,
    };
    Ok(Scenario {
        s_ota: ScatteringMatrix::new(mat_from_dto(&dto.s_ota, "s_ota")?)?,
        hw,
        s_dut_true: ScatteringMatrix::new(mat_from_dto(&dto.s_dut_true, "s_dut_true")?)?,
        partition: PortPartition {
            accessible: dto.partition.accessible.clone(),
            tx: dto.partition.tx.clone(),
            rx: dto.partition.rx.clone(),
            nda_side: dto.partition.nda_side.clone(),
            tln_ota_side: dto.partition.tln_ota_side.clone(),
            dut_side: dto.partition.dut_side.clone(),
        },
        snr_db: dto.snr_db,
        ota_knowledge_error_db: dto.ota_knowledge_error_db,
        seed: dto.seed,
    })
}

pub fn campaign_to_json(
    campaign: &MeasurementCampaign,
    scenario: Option<&Scenario>,
) -> Result<String> {
    let n_s = campaign
        .pf_known
        .first()
        .map(|pf| pf.n_s())
        .or_else(|| scenario.map(|s| s.n_s()))
        .unwrap_or(0);
    let n_a = campaign
        .pf_known
        .first()
        .map(|pf| pf.n_a())
        .or_else(|| scenario.map(|s| s.n_a()))
        .unwrap_or(0);
    let dto = CampaignDto {
        schema_version: CAMPAIGN_SCHEMA_VERSION,
        n_s,
        n_a,
        tx: campaign.tx.clone(),
        rx: campaign.rx.clone(),
        snr_db: campaign.snr_db,
        configs: campaign
            .configs
            .iter()
            .map(|c| ConfigDto {
                token: c.to_token(),
                stage: stage_name(c.stage).to_string(),
            })
            .collect(),
        h_meas: campaign.h_meas.iter().map(mat_to_dto).collect(),
        pf_known: campaign
            .pf_known
            .iter()
            .map(|pf| PFDto {
                config_id: pf.config_id.clone(),
                s_aa: mat_to_dto(&pf.s_aa),
                s_as: mat_to_dto(&pf.s_as),
                s_sa: mat_to_dto(&pf.s_sa),
                s_ss: mat_to_dto(&pf.s_ss),
            })
            .collect(),
        scenario: scenario.map(scenario_to_dto),
    };
    let all_finite = campaign
        .h_meas
        .iter()
        .flat_map(|m| m.iter())
        .chain(campaign.pf_known.iter().flat_map(|pf| {
            pf.s_aa
                .iter()
                .chain(pf.s_as.iter())
                .chain(pf.s_sa.iter())
                .chain(pf.s_ss.iter())
        }))
        .all(|z| z.re.is_finite() && z.im.is_finite());
    if !all_finite {
        return Err(Error::InvalidArgument(
            "non-finite value in campaign data".into(),
        ));
    }
    serde_json::to_string_pretty(&dto)
        .map_err(|e| Error::InvalidArgument(format!("serialization failed: {e}")))
}

pub fn campaign_from_json(text: &str) -> Result<(MeasurementCampaign, Option<Scenario>)> {
    // surface a version mismatch before complaining about shape changes
    #[derive(Deserialize)]
    struct VersionProbe {
        schema_version: u64,
    }
    let probe: VersionProbe = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    if probe.schema_version != CAMPAIGN_SCHEMA_VERSION {
        return Err(Error::SchemaVersion {
            found: probe.schema_version,
            supported: CAMPAIGN_SCHEMA_VERSION,
        });
    }
    let dto: CampaignDto = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let configs = dto
        .configs
        .iter()
        .map(|c| TLNConfiguration::from_token(&c.token, stage_from_name(&c.stage)?))
        .collect::<Result<Vec<_>>>()?;
    let h_meas = dto
        .h_meas
        .iter()
        .map(|m| mat_from_dto(m, "h_meas"))
        .collect::<Result<Vec<_>>>()?;
    let pf_known = dto
        .pf_known
        .iter()
        .map(|pf| {
            Ok(PFRealization {
                s_aa: mat_from_dto(&pf.s_aa, "pf_known.s_aa")?,
                s_as: mat_from_dto(&pf.s_as, "pf_known.s_as")?,
                s_sa: mat_from_dto(&pf.s_sa, "pf_known.s_sa")?,
                s_ss: mat_from_dto(&pf.s_ss, "pf_known.s_ss")?,
                config_id: pf.config_id.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let campaign = MeasurementCampaign {
        configs,
        tx: dto.tx,
        rx: dto.rx,
        h_meas,
        pf_known,
        snr_db: dto.snr_db,
    };
    if !campaign.configs.is_empty() {
        campaign.validate()?;
        if let Some(pf) = campaign.pf_known.first() {
            if pf.n_s() != dto.n_s || pf.n_a() != dto.n_a {
                return Err(Error::DimensionMismatch(
                    "declared n_s/n_a do not match the fixture blocks".into(),
                ));
            }
        }
    }
    let scenario = dto.scenario.as_ref().map(scenario_from_dto).transpose()?;
    Ok((campaign, scenario))
}

pub fn save_campaign(
    path: impl AsRef<Path>,
    campaign: &MeasurementCampaign,
    scenario: Option<&Scenario>,
) -> Result<()> {
    let json = campaign_to_json(campaign, scenario)?;
    std::fs::write(path, json)?;
    Ok(())
}

pub fn load_campaign(path: impl AsRef<Path>) -> Result<(MeasurementCampaign, Option<Scenario>)> {
    let text = std::fs::read_to_string(path)?;
    campaign_from_json(&text)
}

/// Scenario-only file (same JSON container with an empty campaign), used by
/// the generate command.
pub fn save_scenario(path: impl AsRef<Path>, scenario: &Scenario) -> Result<()> {
    let empty = MeasurementCampaign {
        configs: Vec::new(),
        tx: Vec::new(),
        rx: Vec::new(),
        h_meas: Vec::new(),
        pf_known: Vec::new(),
        snr_db: None,
    };
    save_campaign(path, &empty, Some(scenario))
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let (_, scenario) = load_campaign(path)?;
    scenario.ok_or_else(|| Error::InvalidArgument("file does not embed a scenario".into()))
}

// ---------------------------------------------------------------------------
// Estimate reports
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct ReportDto {
    schema_version: u64,
    theta_hat: Vec<Pair>,
    s_dut_hat: MatDto,
    final_loss: f64,
    loss_trace: Vec<f64>,
    restart_losses: Vec<f64>,
    converged: bool,
    passivity_warning: bool,
}

pub fn report_to_json(report: &EstimateReport) -> Result<String> {
    let dto = ReportDto {
        schema_version: CAMPAIGN_SCHEMA_VERSION,
        theta_hat: report.theta_hat.iter().map(|&z| c_to_dto(z)).collect(),
        s_dut_hat: mat_to_dto(&report.s_dut_hat.entries),
        final_loss: report.final_loss,
        loss_trace: report.loss_trace.clone(),
        restart_losses: report.restart_losses.clone(),
        converged: report.converged,
        passivity_warning: report.passivity_warning,
    };
    serde_json::to_string_pretty(&dto)
        .map_err(|e| Error::InvalidArgument(format!("serialization failed: {e}")))
}

pub fn save_report(path: impl AsRef<Path>, report: &EstimateReport) -> Result<()> {
    std::fs::write(path, report_to_json(report)?)?;
    Ok(())
}
