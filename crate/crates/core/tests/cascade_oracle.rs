//! Composition checks against a brute-force oracle that solves the full
//! linear system of incident/reflected wave amplitudes at every internal
//! connection, with no star-product algebra involved.

use deembed::network::{
    compose_pf, forward_model, measurable_s, random_passive_reciprocal,
};
use deembed::tln::{enumerate_configs, synthesize_tln, Stage, TLNHardwareModel};
use deembed::{C64, CMatrix, PFRealization, PortPartition, Tolerances};
use nalgebra::DVector;

fn tol() -> Tolerances {
    Tolerances::default()
}

fn pick(m: &CMatrix, rows: &[usize], cols: &[usize]) -> CMatrix {
    CMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

/// Connect `int1` ports of network 1 to `int2` ports of network 2 pairwise
/// and return the composite scattering matrix over [ext1 then ext2], found
/// by solving for the internal wave amplitudes port by port.
fn connect(
    s1: &CMatrix,
    ext1: &[usize],
    int1: &[usize],
    s2: &CMatrix,
    int2: &[usize],
    ext2: &[usize],
) -> CMatrix {
    assert_eq!(int1.len(), int2.len());
    let k = int1.len();
    let n_ext = ext1.len() + ext2.len();
    let mut out = CMatrix::zeros(n_ext, n_ext);

    // unknowns x = [a_int1; a_int2] (incident waves at the joined ports)
    //   a_int1 - S2[int2,int2] a_int2 = S2[int2,ext2] a_ext2
    //   a_int2 - S1[int1,int1] a_int1 = S1[int1,ext1] a_ext1
    let mut m = CMatrix::identity(2 * k, 2 * k);
    let s2_ii = pick(s2, int2, int2);
    let s1_ii = pick(s1, int1, int1);
    for i in 0..k {
        for j in 0..k {
            m[(i, k + j)] = -s2_ii[(i, j)];
            m[(k + i, j)] = -s1_ii[(i, j)];
        }
    }
    let lu = m.lu();

    for col in 0..n_ext {
        let mut a_ext1 = DVector::<C64>::zeros(ext1.len());
        let mut a_ext2 = DVector::<C64>::zeros(ext2.len());
        if col < ext1.len() {
            a_ext1[col] = C64::new(1.0, 0.0);
        } else {
            a_ext2[col - ext1.len()] = C64::new(1.0, 0.0);
        }
        let mut rhs = DVector::<C64>::zeros(2 * k);
        let top = pick(s2, int2, ext2) * &a_ext2;
        let bot = pick(s1, int1, ext1) * &a_ext1;
        for i in 0..k {
            rhs[i] = top[i];
            rhs[k + i] = bot[i];
        }
        let x = lu.solve(&rhs).expect("internal wave system is singular");
        let a_int1 = x.rows(0, k).into_owned();
        let a_int2 = x.rows(k, k).into_owned();

        let b_ext1 =
            pick(s1, ext1, ext1) * &a_ext1 + pick(s1, ext1, int1) * &a_int1;
        let b_ext2 =
            pick(s2, ext2, ext2) * &a_ext2 + pick(s2, ext2, int2) * &a_int2;
        for i in 0..ext1.len() {
            out[(i, col)] = b_ext1[i];
        }
        for i in 0..ext2.len() {
            out[(ext1.len() + i, col)] = b_ext2[i];
        }
    }
    out
}

fn oracle_compose(
    s_ota: &CMatrix,
    s_tln: &CMatrix,
    partition: &PortPartition,
) -> CMatrix {
    let a: Vec<usize> = partition.accessible.clone();
    let c: Vec<usize> = partition.nda_side.clone();
    let cbar: Vec<usize> = partition.tln_ota_side.clone();
    let s: Vec<usize> = partition.dut_side.clone();
    connect(s_ota, &a, &c, s_tln, &cbar, &s)
}

#[test]
fn compose_pf_matches_wave_amplitude_oracle() {
    let tol = tol();
    for seed in 0..20u64 {
        let n_a = 2 + (seed % 3) as usize;
        let n_s = 1 + (seed % 4) as usize;
        let partition = PortPartition::standard(n_a, n_s);
        let s_ota = random_passive_reciprocal(n_a + n_s, 100 + seed, 0.95).unwrap();
        let s_tln = random_passive_reciprocal(2 * n_s, 200 + seed, 0.95).unwrap();
        let pf = compose_pf(&s_ota, &s_tln, &partition, &tol).unwrap();

        let full = oracle_compose(&s_ota.entries, &s_tln.entries, &partition);
        let aa = full.view((0, 0), (n_a, n_a)).into_owned();
        let as_ = full.view((0, n_a), (n_a, n_s)).into_owned();
        let sa = full.view((n_a, 0), (n_s, n_a)).into_owned();
        let ss = full.view((n_a, n_a), (n_s, n_s)).into_owned();

        assert!((&pf.s_aa - &aa).norm() < 1e-11, "s_aa mismatch at seed {seed}");
        assert!((&pf.s_as - &as_).norm() < 1e-11, "s_as mismatch at seed {seed}");
        assert!((&pf.s_sa - &sa).norm() < 1e-11, "s_sa mismatch at seed {seed}");
        assert!((&pf.s_ss - &ss).norm() < 1e-11, "s_ss mismatch at seed {seed}");
    }
}

#[test]
fn compose_pf_matches_oracle_on_synthesized_tlns() {
    let tol = tol();
    let hw = TLNHardwareModel::default();
    for n_s in 1..=3usize {
        let partition = PortPartition::standard(2, n_s);
        let s_ota = random_passive_reciprocal(2 + n_s, 17 + n_s as u64, 0.95).unwrap();
        for stage in [Stage::Step1, Stage::Step2] {
            for config in enumerate_configs(n_s, stage, &tol).unwrap() {
                let s_tln = synthesize_tln(&config, &hw).unwrap();
                let pf = compose_pf(&s_ota, &s_tln, &partition, &tol).unwrap();
                let full = oracle_compose(&s_ota.entries, &s_tln.entries, &partition);
                let aa = full.view((0, 0), (2, 2)).into_owned();
                let ss = full.view((2, 2), (n_s, n_s)).into_owned();
                assert!((&pf.s_aa - &aa).norm() < 1e-11, "config {}", config.to_token());
                assert!((&pf.s_ss - &ss).norm() < 1e-11, "config {}", config.to_token());
            }
        }
    }
}

#[test]
fn measurable_s_matches_wave_amplitude_oracle() {
    let tol = tol();
    for seed in 0..20u64 {
        let n_a = 2 + (seed % 2) as usize;
        let n_s = 1 + (seed % 3) as usize;
        let partition = PortPartition::standard(n_a, n_s);
        let s_ota = random_passive_reciprocal(n_a + n_s, 300 + seed, 0.95).unwrap();
        let s_tln = random_passive_reciprocal(2 * n_s, 400 + seed, 0.95).unwrap();
        let s_dut = random_passive_reciprocal(n_s, 500 + seed, 0.9).unwrap();
        let pf = compose_pf(&s_ota, &s_tln, &partition, &tol).unwrap();
        let got = measurable_s(&pf, &s_dut, &tol).unwrap();

        let pf_full = oracle_compose(&s_ota.entries, &s_tln.entries, &partition);
        let ext: Vec<usize> = (0..n_a).collect();
        let int: Vec<usize> = (n_a..n_a + n_s).collect();
        let dut_ports: Vec<usize> = (0..n_s).collect();
        let expect = connect(&pf_full, &ext, &int, &s_dut.entries, &dut_ports, &[]);
        assert!((&got.entries - &expect).norm() < 1e-11, "mismatch at seed {seed}");
    }
}

fn pf_from_blocks(full: &CMatrix, n_a: usize, n_s: usize) -> PFRealization {
    PFRealization {
        s_aa: full.view((0, 0), (n_a, n_a)).into_owned(),
        s_as: full.view((0, n_a), (n_a, n_s)).into_owned(),
        s_sa: full.view((n_a, 0), (n_s, n_a)).into_owned(),
        s_ss: full.view((n_a, n_a), (n_s, n_s)).into_owned(),
        config_id: None,
    }
}

#[test]
fn cascade_is_associative() {
    // terminating (OTA * TLN) with the DUT must equal terminating the OTA
    // with (TLN * DUT), elementwise below 1e-10, over 100 random instances
    let tol = tol();
    let start = std::time::Instant::now();
    for seed in 0..100u64 {
        let n_a = 2 + (seed % 3) as usize;
        let n_s = 1 + (seed % 4) as usize;
        let partition = PortPartition::standard(n_a, n_s);
        let s_ota = random_passive_reciprocal(n_a + n_s, 1000 + seed, 0.95).unwrap();
        let s_tln = random_passive_reciprocal(2 * n_s, 2000 + seed, 0.95).unwrap();
        let s_dut = random_passive_reciprocal(n_s, 3000 + seed, 0.9).unwrap();

        let pf = compose_pf(&s_ota, &s_tln, &partition, &tol).unwrap();
        let lhs = measurable_s(&pf, &s_dut, &tol).unwrap();

        // TLN * DUT as an effective n_s-port load, then terminate the OTA
        let tln_pf = pf_from_blocks(&s_tln.entries, n_s, n_s);
        let effective_load = measurable_s(&tln_pf, &s_dut, &tol).unwrap();
        let ota_pf = pf_from_blocks(&s_ota.entries, n_a, n_s);
        let rhs = measurable_s(&ota_pf, &effective_load, &tol).unwrap();

        let max_err = (&lhs.entries - &rhs.entries)
            .iter()
            .map(|z| z.norm())
            .fold(0.0f64, f64::max);
        assert!(max_err < 1e-10, "seed {seed}: max elementwise error {max_err}");
    }
    assert!(start.elapsed().as_secs() < 10);
}

#[test]
fn forward_model_is_block_of_terminated_cascade() {
    let tol = tol();
    let partition = PortPartition::standard(4, 3);
    let s_ota = random_passive_reciprocal(7, 42, 0.95).unwrap();
    let s_tln = random_passive_reciprocal(6, 43, 0.95).unwrap();
    let s_dut = random_passive_reciprocal(3, 44, 0.9).unwrap();
    let pf = compose_pf(&s_ota, &s_tln, &partition, &tol).unwrap();
    let tx = [0usize, 1];
    let rx = [2usize, 3];
    let h = forward_model(&pf, &s_dut, &tx, &rx, &tol).unwrap();
    let full = measurable_s(&pf, &s_dut, &tol).unwrap();
    for (i, &r) in rx.iter().enumerate() {
        for (j, &t) in tx.iter().enumerate() {
            assert!((h[(i, j)] - full.entries[(r, t)]).norm() < 1e-12);
        }
    }
}
