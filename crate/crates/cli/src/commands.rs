//! One function per subcommand. Each reads the effective config, writes its
//! files into the output directory and returns the paths written.

use std::fs;
use std::path::PathBuf;

use ccbs_core::exec::Execution;
use ccbs_core::footprint::{clements_increment, compare_layouts};
use ccbs_core::haarstats::{
    device_ensemble, ensemble_moduli_phase_histograms, haar_column_similarities, haar_unitary, histogram_overlap, input_rows,
    pairwise_similarities, Histogram, DEFAULT_BINS,
};
use ccbs_core::interference::{
    distribution_on, sample, spdc_sample, spdc_tables, FockPattern, SampleEvent, SourceWeights, Statistics,
};
use ccbs_core::linalg::UnitaryMatrix;
use ccbs_core::reconstruction::{
    default_input_pairs, gauge_distance, reconstruct, target_rows, DipFit, HomDataset, ReconstructedSubmatrix,
};
use ccbs_core::rng::{derive_seed, member_seed, Stream};
use ccbs_core::stats::mean;
use ccbs_core::validation::{wrong_unitary_slope_histogram, InputModel, TestKind, Validator};
use serde::{Deserialize, Serialize};

use crate::config::{HomData, RunConfig, SourceConfig};
use crate::error::CliError;
use crate::output::{OutDir, Provenance};

const EXEC: Execution = Execution::Parallel;

/// The configured circuit: loaded from `cfg.unitary` or propagated.
pub fn circuit(cfg: &RunConfig) -> Result<UnitaryMatrix, CliError> {
    match &cfg.unitary {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read unitary {}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("invalid unitary {}: {e}", path.display())))
        }
        None => Ok(cfg.device()?.unitary(&cfg.propagation_options())?),
    }
}

pub fn simulate(cfg: &RunConfig, out: &OutDir) -> Result<Vec<PathBuf>, CliError> {
    let u = cfg.device()?.unitary(&cfg.propagation_options())?;
    let serde_json::Value::Object(mut file) = serde_json::to_value(&u)? else {
        unreachable!("a unitary serializes to an object")
    };
    file.insert("provenance".into(), serde_json::to_value(Provenance::new("simulate", cfg)?)?);
    file.insert("unitarity_defect".into(), u.unitarity_defect().into());
    Ok(vec![out.json("unitary.json", &file)?])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleHeader {
    pub m: usize,
    pub inputs: Vec<usize>,
    pub outputs: Vec<usize>,
    pub source: SourceConfig,
    pub statistics: Statistics,
    pub collision_free: bool,
    pub events: usize,
}

fn source_weights(r: f64) -> Result<SourceWeights, CliError> {
    Ok(SourceWeights::from_ratio(r)?)
}

/// Draws `cfg.events` events from the configured source on `u`.
pub fn draw_samples(cfg: &RunConfig, u: &UnitaryMatrix, statistics: Statistics, seed: u64) -> Result<(SampleHeader, Vec<SampleEvent>), CliError> {
    let m = u.m();
    cfg.check_inputs(m)?;
    let outputs = cfg.outputs(m)?;
    let events = match cfg.source {
        SourceConfig::Fixed => {
            let input = FockPattern::from_modes(m, &cfg.inputs)?;
            let table = distribution_on(u, &input, statistics, cfg.collision_free, &outputs, EXEC)?;
            sample(&table, seed, cfg.events)?
        }
        SourceConfig::Spdc { r } => {
            if !cfg.collision_free {
                return Err(CliError::Config("the SPDC source is sampled on collision-free patterns only".into()));
            }
            let tables = spdc_tables(u, &cfg.inputs, &outputs, statistics, EXEC)?;
            spdc_sample(&tables, &source_weights(r)?, seed, cfg.events)?
        }
    };
    let header = SampleHeader {
        m,
        inputs: cfg.inputs.clone(),
        outputs,
        source: cfg.source,
        statistics,
        collision_free: cfg.collision_free,
        events: cfg.events,
    };
    Ok((header, events))
}

#[derive(Serialize)]
struct HeaderRecord<'a> {
    header: &'a SampleHeader,
    provenance: Provenance,
}

pub fn sample_cmd(cfg: &RunConfig, out: &OutDir) -> Result<Vec<PathBuf>, CliError> {
    let u = circuit(cfg)?;
    let (header, events) = draw_samples(cfg, &u, cfg.statistics, derive_seed(cfg.seed, Stream::Sampling))?;
    let record = HeaderRecord { header: &header, provenance: Provenance::new("sample", cfg)? };
    Ok(vec![out.jsonl("samples.jsonl", &record, &events)?])
}

#[derive(Deserialize)]
struct HeaderLine {
    header: SampleHeader,
}

/// Reads a samples file: the header line, then one event per line.
pub fn read_samples(path: &std::path::Path) -> Result<(SampleHeader, Vec<SampleEvent>), CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read samples {}: {e}", path.display())))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let first = lines.next().ok_or_else(|| CliError::Config(format!("{} is empty", path.display())))?;
    let header: HeaderLine = serde_json::from_str(first)
        .map_err(|e| CliError::Config(format!("{}: first line is not a header record: {e}", path.display())))?;
    let events = lines
        .enumerate()
        .map(|(k, l)| serde_json::from_str(l).map_err(|e| CliError::Config(format!("{} line {}: {e}", path.display(), k + 2))))
        .collect::<Result<Vec<SampleEvent>, _>>()?;
    Ok((header.header, events))
}

fn input_model(cfg: &RunConfig) -> Result<InputModel, CliError> {
    Ok(match cfg.source {
        SourceConfig::Fixed => InputModel::Fixed(cfg.inputs.clone()),
        SourceConfig::Spdc { r } => {
            InputModel::Spdc { inputs: cfg.inputs.clone(), weights: source_weights(r)?, scoring: cfg.validation.scoring }
        }
    })
}

#[derive(Serialize)]
struct TraceRow {
    event: usize,
    counter: i64,
}

#[derive(Serialize)]
struct BinRow {
    bin_lo: f64,
    bin_hi: f64,
    mass: f64,
}

fn bin_rows(h: &Histogram) -> Vec<BinRow> {
    h.masses.iter().enumerate().map(|(k, &mass)| BinRow { bin_lo: h.bin_edges[k], bin_hi: h.bin_edges[k + 1], mass }).collect()
}

#[derive(Serialize)]
struct ValidationSummary {
    provenance: Provenance,
    test: TestKind,
    events: usize,
    accepted: usize,
    rejected: usize,
    skipped: usize,
    slope: f64,
    normalized_slope: Option<f64>,
    reference_slope: Option<f64>,
    /// One-sided sign-test p-values for a rising and a falling counter.
    p_value_rising: f64,
    p_value_falling: f64,
    ensemble: usize,
    ensemble_mean: f64,
    ensemble_std_dev: f64,
    z_score: f64,
}

pub fn validate(cfg: &RunConfig, out: &OutDir) -> Result<Vec<PathBuf>, CliError> {
    let u = circuit(cfg)?;
    let sampling_seed = derive_seed(cfg.seed, Stream::Sampling);
    let (header, events) = match &cfg.samples {
        Some(path) => read_samples(path)?,
        None => draw_samples(cfg, &u, cfg.statistics, sampling_seed)?,
    };
    if header.m != u.m() {
        return Err(CliError::Config(format!("samples were drawn on {} modes but the circuit has {}", header.m, u.m())));
    }
    if let Some(ev) = events.iter().find(|e| e.output.iter().any(|&k| k >= u.m())) {
        return Err(CliError::Config(format!("event {} references a mode outside the {}-mode circuit", ev.index, u.m())));
    }
    let validator = Validator { kind: cfg.validation.test, input: input_model(cfg)?, modes: header.outputs.len() };
    let reference_slope = if cfg.validation.normalize {
        let (_, reference) = draw_samples(cfg, &u, Statistics::Distinguishable, member_seed(sampling_seed, 1))?;
        Some(validator.score(&reference, &u, EXEC)?.slope)
    } else {
        None
    };
    let mut trace = validator.score(&events, &u, EXEC)?;
    if let Some(r) = reference_slope {
        trace = trace.with_reference(r)?;
    }
    let report = wrong_unitary_slope_histogram(
        &events,
        &validator,
        &u,
        cfg.validation.ensemble,
        derive_seed(cfg.seed, Stream::Ensemble),
        reference_slope,
        EXEC,
    )?;
    let rows: Vec<TraceRow> = trace.counter_values.iter().enumerate().map(|(k, &c)| TraceRow { event: k + 1, counter: c }).collect();
    let slopes: Vec<(usize, f64)> = report.ensemble_slopes.iter().copied().enumerate().collect();
    let summary = ValidationSummary {
        provenance: Provenance::new("validate", cfg)?,
        test: trace.test_kind,
        events: events.len(),
        accepted: trace.counter_values.len(),
        rejected: trace.rejected,
        skipped: trace.skipped,
        slope: trace.slope,
        normalized_slope: trace.normalized_slope,
        reference_slope,
        p_value_rising: trace.sign_p_value(true)?,
        p_value_falling: trace.sign_p_value(false)?,
        ensemble: report.ensemble_slopes.len(),
        ensemble_mean: report.mean,
        ensemble_std_dev: report.std_dev,
        z_score: report.z_score,
    };
    Ok(vec![
        out.csv("trace.csv", &["event", "counter"], &rows)?,
        out.csv("slope_histogram.csv", &["bin_lo", "bin_hi", "mass"], &bin_rows(&report.histogram))?,
        out.csv("ensemble_slopes.csv", &["member", "slope"], &slopes)?,
        out.json("validation.json", &summary)?,
    ])
}

#[derive(Serialize)]
struct ResidualRow {
    pair_h: usize,
    pair_k: usize,
    i: usize,
    j: usize,
    plateau: f64,
    visibility: Option<f64>,
    model_plateau: f64,
    model_visibility: Option<f64>,
    scan_chi2: Option<f64>,
}

#[derive(Serialize)]
struct GaugeDistance {
    moduli_rmse: f64,
    phase_rmse: f64,
}

#[derive(Serialize)]
struct ReconstructionReport<'a> {
    provenance: Provenance,
    data: HomData,
    input_pairs: &'a [(usize, usize)],
    submatrix: &'a ReconstructedSubmatrix,
    gauge_distance: GaugeDistance,
}

fn residual_rows(ds: &HomDataset, rec: &ReconstructedSubmatrix, fits: Option<&[Vec<Option<DipFit>>]>) -> Vec<ResidualRow> {
    let s = rec.matrix();
    let mut rows = Vec::new();
    for (p, (&(h, k), entries)) in ds.input_pairs.iter().zip(&ds.entries).enumerate() {
        for (n, e) in entries.iter().enumerate() {
            let (i, j) = (e.i, e.j);
            let a = s[(h, i)].norm_sqr() * s[(k, j)].norm_sqr() + s[(h, j)].norm_sqr() * s[(k, i)].norm_sqr();
            let q = (s[(h, i)] * s[(k, j)] + s[(h, j)] * s[(k, i)]).norm_sqr();
            rows.push(ResidualRow {
                pair_h: h,
                pair_k: k,
                i,
                j,
                plateau: e.a,
                visibility: e.visibility,
                model_plateau: a,
                model_visibility: (a > 0.0).then(|| (a - q) / a),
                scan_chi2: fits.and_then(|f| f[p][n].as_ref()).map(|f| f.chi2),
            });
        }
    }
    rows
}

pub fn reconstruct_cmd(cfg: &RunConfig, out: &OutDir) -> Result<Vec<PathBuf>, CliError> {
    let u = circuit(cfg)?;
    cfg.check_inputs(u.m())?;
    let rc = &cfg.reconstruction;
    let pairs = rc.input_pairs.clone().unwrap_or_else(|| default_input_pairs(cfg.inputs.len()));
    let noise_seed = derive_seed(cfg.seed, Stream::Noise);
    let (ds, fits) = match rc.data {
        HomData::Exact => (HomDataset::from_unitary(&u, &cfg.inputs, &pairs)?, None),
        HomData::Poisson => {
            (HomDataset::from_unitary(&u, &cfg.inputs, &pairs)?.with_poisson_noise(rc.scan.plateau_counts, noise_seed)?, None)
        }
        HomData::DipScan => {
            let (ds, fits) = HomDataset::from_dip_scans(&u, &cfg.inputs, &pairs, &rc.scan, noise_seed, EXEC)?;
            (ds, Some(fits))
        }
    };
    let rec = reconstruct(&ds, &rc.options)?;
    let (moduli_rmse, phase_rmse) = gauge_distance(&rec, &target_rows(&u, &cfg.inputs)?)?;
    let report = ReconstructionReport {
        provenance: Provenance::new("reconstruct", cfg)?,
        data: rc.data,
        input_pairs: &pairs,
        submatrix: &rec,
        gauge_distance: GaugeDistance { moduli_rmse, phase_rmse },
    };
    let header = [
        "pair_h",
        "pair_k",
        "i",
        "j",
        "plateau",
        "visibility",
        "model_plateau",
        "model_visibility",
        "scan_chi2",
    ];
    Ok(vec![
        out.json("reconstruction.json", &report)?,
        out.csv("residuals.csv", &header, &residual_rows(&ds, &rec, fits.as_deref()))?,
    ])
}

#[derive(Serialize)]
struct PairedBinRow {
    bin_lo: f64,
    bin_hi: f64,
    device: f64,
    haar: f64,
}

fn paired_rows(device: &Histogram, haar: &Histogram) -> Vec<PairedBinRow> {
    (0..device.bins())
        .map(|k| PairedBinRow {
            bin_lo: device.bin_edges[k],
            bin_hi: device.bin_edges[k + 1],
            device: device.masses[k],
            haar: haar.masses[k],
        })
        .collect()
}

#[derive(Serialize)]
struct HaarSummary {
    provenance: Provenance,
    m: usize,
    device_ensemble: usize,
    mean_device_similarity: f64,
    mean_haar_similarity: f64,
    similarity_overlap: f64,
    moduli_overlap: f64,
    phase_overlap: f64,
}

pub fn haar(cfg: &RunConfig, out: &OutDir) -> Result<Vec<PathBuf>, CliError> {
    let hc = &cfg.haar;
    if hc.device_ensemble < 2 || hc.similarity_pairs == 0 {
        return Err(CliError::Config("haar needs device_ensemble >= 2 and similarity_pairs >= 1".into()));
    }
    let device = cfg.device()?;
    let m = device.m();
    cfg.check_inputs(m)?;
    let ensemble_seed = derive_seed(cfg.seed, Stream::Ensemble);
    let members = device_ensemble(&device, hc.max_power, hc.device_ensemble, ensemble_seed, &cfg.propagation_options(), EXEC)?;
    let device_rows = members.iter().map(|u| input_rows(u, &cfg.inputs)).collect::<Result<Vec<_>, _>>()?;
    let haar_seed = derive_seed(member_seed(cfg.seed, 1), Stream::Ensemble);
    let haar_rows = (0..hc.device_ensemble)
        .map(|k| input_rows(&haar_unitary(m, member_seed(haar_seed, k as u64))?, &cfg.inputs))
        .collect::<Result<Vec<_>, _>>()?;
    let (dev_mod, dev_phase) = ensemble_moduli_phase_histograms(&device_rows)?;
    let (haar_mod, haar_phase) = ensemble_moduli_phase_histograms(&haar_rows)?;

    // output distributions of each input across heater settings
    let mut device_sims = Vec::new();
    for l in 0..cfg.inputs.len() {
        let columns: Vec<Vec<f64>> = device_rows.iter().map(|s| s.row(l).iter().map(|z| z.norm_sqr()).collect()).collect();
        device_sims.extend(pairwise_similarities(&columns)?);
    }
    let haar_sims = haar_column_similarities(m, hc.similarity_pairs, derive_seed(haar_seed, Stream::Sampling), EXEC);
    let edges = Histogram::uniform_edges(0.0, 1.0, DEFAULT_BINS);
    let dev_sim = Histogram::from_samples(&device_sims, edges.clone())?;
    let haar_sim = Histogram::from_samples(&haar_sims, edges)?;

    let summary = HaarSummary {
        provenance: Provenance::new("haar", cfg)?,
        m,
        device_ensemble: hc.device_ensemble,
        mean_device_similarity: mean(&device_sims),
        mean_haar_similarity: mean(&haar_sims),
        similarity_overlap: histogram_overlap(&dev_sim, &haar_sim)?,
        moduli_overlap: histogram_overlap(&dev_mod, &haar_mod)?,
        phase_overlap: histogram_overlap(&dev_phase, &haar_phase)?,
    };
    let header = ["bin_lo", "bin_hi", "device", "haar"];
    Ok(vec![
        out.csv("similarity_histogram.csv", &header, &paired_rows(&dev_sim, &haar_sim))?,
        out.csv("moduli_histogram.csv", &header, &paired_rows(&dev_mod, &haar_mod))?,
        out.csv("phase_histogram.csv", &header, &paired_rows(&dev_phase, &haar_phase))?,
        out.json("haar.json", &summary)?,
    ])
}

#[derive(Serialize)]
struct FootprintSummary {
    provenance: Provenance,
    clements_slope: f64,
    lattice_slope: f64,
    clements_increment_mm: f64,
}

pub fn footprint(cfg: &RunConfig, out: &OutDir) -> Result<Vec<PathBuf>, CliError> {
    let fc = &cfg.footprint;
    let table = compare_layouts(&fc.modes, &fc.params)?;
    let summary = FootprintSummary {
        provenance: Provenance::new("footprint", cfg)?,
        clements_slope: table.clements_slope,
        lattice_slope: table.lattice_slope,
        clements_increment_mm: clements_increment(fc.params.r_min, fc.params.pitch, fc.params.c_clements)?,
    };
    Ok(vec![out.text("layouts.csv", &table.to_csv())?, out.json("footprint.json", &summary)?])
}
