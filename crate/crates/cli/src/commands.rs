use std::fs::{self, File};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;
use triphoton::design::{fom_all, ideal_tritter, measured_tritter, TargetSpec};
use triphoton::distinguishability::{
    delay_limits, hom_curve, threefold_curve, two_photon_limits, visibility_three, DelayReference,
    DelayScan,
};
use triphoton::fitting::{
    fit_gaussian, visibility_uncertainty, FitMode, FitOptions, VisibilityConvention,
};
use triphoton::formats::{
    read_matrix, read_scan, read_singles_csv, read_visibility_csv, sidecar_path, write_json,
    write_scan, write_scan_csv, write_singles_csv, write_visibility_csv, MatrixFile, ScanMetadata,
    TomographyFile,
};
use triphoton::random::{poisson, substream};
use triphoton::tomography::{
    mean_phase_sigma_pi, mean_relative_amplitude_sigma, monte_carlo, poisson_records,
    poisson_singles, predict_visibilities, q_vis, reconstruct as reconstruct_matrix,
    synthetic_records, synthetic_singles, SinglesCounts, TomographyResult, VisibilityRecord,
};
use triphoton::{PhotonConfiguration, TransferMatrix};

use crate::manifest::RunManifest;
use crate::{
    CliError, DatasetArgs, FitArgs, FomArgs, MatrixSource, MontecarloArgs, PredictArgs,
    ReconstructArgs, SimulateHomArgs, SimulateThreefoldArgs,
};

type Result<T> = std::result::Result<T, CliError>;

/// `start:stop:step`, inclusive of `stop` when it lies on the grid.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || CliError::Usage(format!("delay grid must be start:stop:step, got {spec:?}"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| bad())?;
    let (start, stop, step) = (nums[0], nums[1], nums[2]);
    if !(start.is_finite() && stop.is_finite() && step.is_finite()) || step <= 0.0 || stop < start {
        return Err(CliError::Usage(format!(
            "delay grid needs finite start <= stop and step > 0, got {spec:?}"
        )));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    if n > 1_000_000 {
        return Err(CliError::Usage(format!(
            "delay grid {spec:?} has too many points"
        )));
    }
    Ok((0..=n).map(|k| start + step * k as f64).collect())
}

fn load_matrix(source: &MatrixSource) -> Result<(TransferMatrix, Option<PathBuf>)> {
    match &source.matrix {
        Some(path) => Ok((read_matrix(path)?, Some(path.clone()))),
        None => Ok((ideal_tritter(), None)),
    }
}

fn with_matrix(manifest: RunManifest, path: &Option<PathBuf>) -> Result<RunManifest> {
    match path {
        Some(p) => manifest.input(p),
        None => Ok(manifest.param("matrix", "tritter")),
    }
}

/// 1-based labels to 0-based modes, checking the count.
fn modes(labels: &[usize], count: usize, what: &str) -> Result<Vec<usize>> {
    if labels.len() != count {
        return Err(CliError::Usage(format!(
            "--{what} needs {count} comma-separated modes, got {}",
            labels.len()
        )));
    }
    if labels.contains(&0) {
        return Err(CliError::Usage(format!("--{what} modes are 1-based")));
    }
    Ok(labels.iter().map(|l| l - 1).collect())
}

fn sample_scan(scan: &DelayScan, scale: f64, seed: u64, stream: u64) -> Result<DelayScan> {
    let mut rng = substream(seed, stream);
    let values: Vec<f64> = scan
        .values()
        .iter()
        .map(|&v| poisson(scale * v, &mut rng))
        .collect();
    Ok(scan.with_values(&values)?)
}

fn scaled_scan(scan: &DelayScan, scale: f64) -> Result<DelayScan> {
    let values: Vec<f64> = scan.values().iter().map(|&v| scale * v).collect();
    Ok(scan.with_values(&values)?)
}

fn write_stdout(bytes: &[u8]) -> Result<()> {
    let mut out = io::stdout().lock();
    out.write_all(bytes)?;
    out.flush()?;
    Ok(())
}

fn emit_json<T: Serialize>(out: Option<&Path>, value: &T, manifest: RunManifest) -> Result<()> {
    match out {
        Some(path) => {
            write_json(path, value)?;
            finish(manifest, &[path.to_path_buf()], path)
        }
        None => {
            let mut text = serde_json::to_string_pretty(value)?;
            text.push('\n');
            write_stdout(text.as_bytes())
        }
    }
}

fn finish(mut manifest: RunManifest, outputs: &[PathBuf], main: &Path) -> Result<()> {
    for o in outputs {
        manifest.output(o);
    }
    manifest.write(&RunManifest::path_for(main))
}

fn emit_scan(
    scan: &DelayScan,
    meta: &ScanMetadata,
    out: Option<&Path>,
    manifest: RunManifest,
) -> Result<()> {
    match out {
        Some(path) => {
            write_scan(path, scan, meta)?;
            finish(manifest, &[path.to_path_buf(), sidecar_path(path)], path)
        }
        None => {
            let mut buf = Vec::new();
            write_scan_csv(&mut buf, scan)?;
            write_stdout(&buf)
        }
    }
}

pub fn simulate_hom(a: &SimulateHomArgs) -> Result<()> {
    let (m, path) = load_matrix(&a.source)?;
    let ins = modes(&a.inputs, 2, "inputs")?;
    let outs = modes(&a.outputs, 2, "outputs")?;
    let delays = parse_grid(&a.curve.delays)?;
    let mut scan = hom_curve(
        &m,
        (ins[0], ins[1]),
        (outs[0], outs[1]),
        &delays,
        a.curve.sigma,
    )?;
    if let Some(level) = a.curve.counts {
        let (c_inf, _) = two_photon_limits(&m, (ins[0], ins[1]), (outs[0], outs[1]))?;
        scan = sample_scan(&scan, level / c_inf, a.curve.seed, 0)?;
    }
    let scan = scan.with_integration_time(a.curve.integration_time);
    let meta = ScanMetadata {
        inputs: a.inputs.clone(),
        outputs: a.outputs.clone(),
        sigma_ps: a.curve.sigma,
        integration_time_s: a.curve.integration_time,
        delayed_input: Some(a.inputs[1]),
        counts_level: a.curve.counts,
        seed: a.curve.counts.map(|_| a.curve.seed),
    };
    let manifest = with_matrix(RunManifest::new("simulate-hom"), &path)?
        .param("inputs", &a.inputs)
        .param("outputs", &a.outputs)
        .param("delays", &a.curve.delays)
        .param("sigma_ps", a.curve.sigma)
        .param("counts", a.curve.counts)
        .param("seed", a.curve.seed);
    emit_scan(&scan, &meta, a.curve.out.as_deref(), manifest)
}

pub fn simulate_threefold(a: &SimulateThreefoldArgs) -> Result<()> {
    let (m, path) = load_matrix(&a.source)?;
    let ins = modes(&a.inputs, 3, "inputs")?;
    let outs = modes(&a.outputs, 3, "outputs")?;
    let delayed = modes(&[a.delayed], 1, "delayed")?[0];
    let delays = parse_grid(&a.curve.delays)?;
    let mut scan = threefold_curve(
        &m,
        [ins[0], ins[1], ins[2]],
        [outs[0], outs[1], outs[2]],
        delayed,
        &delays,
        a.curve.sigma,
    )?;
    if let Some(level) = a.curve.counts {
        let input = PhotonConfiguration::new(ins.clone())?;
        let output = PhotonConfiguration::new(outs.clone())?;
        let (c_inf, _) = delay_limits(&m, &input, &output, DelayReference::DelayedInput(delayed))?;
        scan = sample_scan(&scan, level / c_inf, a.curve.seed, 0)?;
    }
    let scan = scan.with_integration_time(a.curve.integration_time);
    let meta = ScanMetadata {
        inputs: a.inputs.clone(),
        outputs: a.outputs.clone(),
        sigma_ps: a.curve.sigma,
        integration_time_s: a.curve.integration_time,
        delayed_input: Some(a.delayed),
        counts_level: a.curve.counts,
        seed: a.curve.counts.map(|_| a.curve.seed),
    };
    let manifest = with_matrix(RunManifest::new("simulate-threefold"), &path)?
        .param("inputs", &a.inputs)
        .param("outputs", &a.outputs)
        .param("delayed", a.delayed)
        .param("delays", &a.curve.delays)
        .param("sigma_ps", a.curve.sigma)
        .param("counts", a.curve.counts)
        .param("seed", a.curve.seed);
    emit_scan(&scan, &meta, a.curve.out.as_deref(), manifest)
}

#[derive(Serialize)]
struct TomographyReport {
    #[serde(flatten)]
    file: TomographyFile,
    #[serde(skip_serializing_if = "Option::is_none")]
    mean_relative_amplitude_sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mean_phase_sigma_pi_units: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

fn load_tomography_inputs(
    singles: &Path,
    visibilities: &Path,
) -> Result<(SinglesCounts, Vec<VisibilityRecord>)> {
    let counts = read_singles_csv(File::open(singles)?)?;
    let records = read_visibility_csv(File::open(visibilities)?)?;
    Ok((counts, records))
}

fn tomography_report(
    result: &TomographyResult,
    records: &[VisibilityRecord],
    seed: Option<u64>,
) -> Result<TomographyReport> {
    let predicted = predict_visibilities(&result.matrix)?;
    let q = q_vis(records, &predicted)?;
    let sampled = result.resample_count > 0;
    Ok(TomographyReport {
        file: TomographyFile::from_result(result, Some(q)),
        mean_relative_amplitude_sigma: sampled.then(|| mean_relative_amplitude_sigma(result)),
        mean_phase_sigma_pi_units: sampled.then(|| mean_phase_sigma_pi(result)),
        seed,
    })
}

fn run_tomography(
    command: &str,
    singles: &Path,
    visibilities: &Path,
    resamples: usize,
    seed: u64,
    out: Option<&Path>,
) -> Result<()> {
    let manifest = RunManifest::new(command)
        .input(singles)?
        .input(visibilities)?
        .param("resamples", resamples)
        .param("seed", seed);
    let (counts, records) = load_tomography_inputs(singles, visibilities)?;
    let result = if resamples > 0 {
        monte_carlo(&counts, &records, resamples, seed)?
    } else {
        reconstruct_matrix(&counts, &records)?
    };
    let report = tomography_report(&result, &records, (resamples > 0).then_some(seed))?;
    emit_json(out, &report, manifest)
}

pub fn reconstruct(a: &ReconstructArgs) -> Result<()> {
    run_tomography(
        "reconstruct",
        &a.singles,
        &a.visibilities,
        a.montecarlo,
        a.seed,
        a.out.as_deref(),
    )
}

pub fn montecarlo(a: &MontecarloArgs) -> Result<()> {
    if a.resamples < 2 {
        return Err(CliError::Usage("--resamples must be at least 2".into()));
    }
    run_tomography(
        "montecarlo",
        &a.singles,
        &a.visibilities,
        a.resamples,
        a.seed,
        a.out.as_deref(),
    )
}

fn three_photon_summary(m: &TransferMatrix) -> Result<serde_json::Value> {
    if m.rows() < 3 || m.cols() < 3 {
        return Ok(serde_json::Value::Null);
    }
    let all = PhotonConfiguration::new([0, 1, 2])?;
    let (c_mix, c0) = delay_limits(m, &all, &all, DelayReference::DelayedInput(0))?;
    let (c_all, _) = delay_limits(m, &all, &all, DelayReference::AllDistinguishable)?;
    Ok(json!({
        "inputs": [1, 2, 3],
        "outputs": [1, 2, 3],
        "c_zero": c0,
        "delayed_input": { "mode": 1, "c_inf": c_mix, "visibility": visibility_three(c_mix, c0)? },
        "all_distinguishable": { "c_inf": c_all, "visibility": visibility_three(c_all, c0)? },
    }))
}

pub fn predict(a: &PredictArgs) -> Result<()> {
    let (m, path) = load_matrix(&a.source)?;
    let mut manifest = with_matrix(RunManifest::new("predict"), &path)?;
    let records = predict_visibilities(&m)?;
    let summary = json!({
        "visibilities": records.iter().map(|r| {
            let (i, j, l, mm) = r.key.labels();
            json!({ "i": i, "j": j, "l": l, "m": mm, "V": r.value })
        }).collect::<Vec<_>>(),
        "three_photon": three_photon_summary(&m)?,
    });
    if let Some(out) = &a.out {
        write_visibility_csv(File::create(out)?, &records)?;
        manifest.output(out);
        manifest.write(&RunManifest::path_for(out))?;
    }
    let mut text = serde_json::to_string_pretty(&summary)?;
    text.push('\n');
    write_stdout(text.as_bytes())
}

pub fn fit(a: &FitArgs) -> Result<()> {
    let mode: FitMode = a
        .mode
        .parse()
        .map_err(|e: triphoton::Error| CliError::Usage(e.to_string()))?;
    let manifest = RunManifest::new("fit")
        .input(&a.scan)?
        .param("mode", &a.mode)
        .param("resamples", a.resamples)
        .param("seed", a.seed);
    let (scan, meta) = read_scan(&a.scan)?;
    let fit = fit_gaussian(&scan, mode)?;
    // peaks are reported against C(0), dips against C(inf)
    let convention = if fit.visibility < 0.0 {
        VisibilityConvention::ZeroDelayNormalized
    } else {
        VisibilityConvention::BaselineNormalized
    };
    let integer = scan.values().iter().all(|v| v.fract() == 0.0);
    let bootstrap = if a.resamples == 0 {
        json!(null)
    } else if !integer {
        json!({ "skipped": "scan values are not integer counts" })
    } else {
        let (mean, sigma) = visibility_uncertainty(
            &scan,
            &FitOptions::with_mode(mode),
            convention,
            a.resamples,
            a.seed,
        )?;
        json!({ "resamples": a.resamples, "seed": a.seed, "convention": convention, "mean": mean, "sigma": sigma })
    };
    let sd = |k: usize| fit.covariance_diag[k].max(0.0).sqrt();
    let report = json!({
        "mode": mode,
        "baseline": fit.baseline,
        "visibility": fit.visibility,
        "zero_delay_visibility": fit.zero_delay_visibility(),
        "reported_visibility": fit.visibility_as(convention),
        "convention": convention,
        "center_ps": fit.center_ps,
        "width_ps": fit.width_ps,
        "residual_rms": fit.residual_rms,
        "converged": fit.converged,
        "iterations": fit.iterations,
        "covariance_sigma": {
            "baseline": sd(0),
            "visibility": sd(1),
            "center_ps": sd(2),
            "width_ps": sd(3),
        },
        "bootstrap": bootstrap,
        "scan": meta,
    });
    emit_json(a.out.as_deref(), &report, manifest)
}

pub fn fom(a: &FomArgs) -> Result<()> {
    let mut manifest = RunManifest::new("fom").input(&a.matrix)?;
    let candidate = read_matrix(&a.matrix)?;
    let target = match &a.target {
        Some(p) => {
            manifest = manifest.input(p)?;
            TargetSpec::new(read_matrix(p)?, p.display().to_string())?
        }
        None => {
            manifest = manifest.param("target", "tritter");
            TargetSpec::tritter()
        }
    };
    let (per_input, overall) = fom_all(&candidate, &target)?;
    let report = json!({ "target": target.label(), "per_input": per_input, "overall": overall });
    emit_json(a.out.as_deref(), &report, manifest)
}

pub fn make_paper_dataset(a: &DatasetArgs) -> Result<()> {
    for (name, v) in [
        ("singles-level", a.singles_level),
        ("pair-level", a.pair_level),
        ("threefold-level", a.threefold_level),
    ] {
        if !(v.is_finite() && v > 0.0) {
            return Err(CliError::Usage(format!("--{name} must be positive")));
        }
    }
    let delays = parse_grid(&a.delays)?;
    let threefold_delays = parse_grid(&a.threefold_delays)?;
    fs::create_dir_all(&a.out)?;
    let m = measured_tritter();
    let seed = a.poisson.then_some(a.seed);
    let mut outputs = Vec::new();

    let matrix_path = a.out.join("matrix.json");
    write_json(
        &matrix_path,
        &MatrixFile::polar_scaled(&m, 1.0 / 3f64.sqrt()),
    )?;
    outputs.push(matrix_path);

    let mut singles = synthetic_singles(&m, a.singles_level)?;
    let mut records = synthetic_records(&m, a.pair_level)?;
    if a.poisson {
        singles = poisson_singles(&singles, &mut substream(a.seed, 0))?;
        records = poisson_records(&records, &mut substream(a.seed, 1))?;
    }
    let singles_path = a.out.join("singles.csv");
    write_singles_csv(File::create(&singles_path)?, &singles)?;
    let vis_path = a.out.join("visibilities.csv");
    write_visibility_csv(File::create(&vis_path)?, &records)?;
    outputs.extend([singles_path, vis_path]);

    // HOM scans share the scale of the visibility records
    let exact = synthetic_records(&m, a.pair_level)?;
    for (k, rec) in exact.iter().enumerate() {
        let raw = rec.raw.expect("synthetic records carry counts");
        let (c_inf, _) = two_photon_limits(&m, rec.key.inputs, rec.key.outputs)?;
        let scale = raw.c_inf / c_inf;
        let curve = hom_curve(&m, rec.key.inputs, rec.key.outputs, &delays, a.sigma)?;
        let scan = if a.poisson {
            sample_scan(&curve, scale, a.seed, 2 + k as u64)?
        } else {
            scaled_scan(&curve, scale)?
        };
        let (i, j, l, mm) = rec.key.labels();
        let path = a.out.join(format!("hom_in{i}{j}_out{l}{mm}.csv"));
        let meta = ScanMetadata {
            inputs: vec![i, j],
            outputs: vec![l, mm],
            sigma_ps: a.sigma,
            integration_time_s: triphoton::distinguishability::DEFAULT_INTEGRATION_TIME_S,
            delayed_input: Some(j),
            counts_level: Some(raw.c_inf),
            seed,
        };
        write_scan(&path, &scan, &meta)?;
        let sidecar = sidecar_path(&path);
        outputs.extend([path, sidecar]);
    }

    let all = PhotonConfiguration::new([0, 1, 2])?;
    let (c_mix, _) = delay_limits(&m, &all, &all, DelayReference::DelayedInput(0))?;
    let curve = threefold_curve(&m, [0, 1, 2], [0, 1, 2], 0, &threefold_delays, a.sigma)?;
    let scale = a.threefold_level / c_mix;
    let scan = if a.poisson {
        sample_scan(&curve, scale, a.seed, 100)?
    } else {
        scaled_scan(&curve, scale)?
    };
    let path = a.out.join("threefold_in123_out123.csv");
    let meta = ScanMetadata {
        inputs: vec![1, 2, 3],
        outputs: vec![1, 2, 3],
        sigma_ps: a.sigma,
        integration_time_s: triphoton::distinguishability::DEFAULT_INTEGRATION_TIME_S,
        delayed_input: Some(1),
        counts_level: Some(a.threefold_level),
        seed,
    };
    write_scan(&path, &scan, &meta)?;
    let sidecar = sidecar_path(&path);
    outputs.extend([path, sidecar]);

    let mut manifest = RunManifest::new("make-paper-dataset")
        .param("singles_level", a.singles_level)
        .param("pair_level", a.pair_level)
        .param("threefold_level", a.threefold_level)
        .param("delays", &a.delays)
        .param("threefold_delays", &a.threefold_delays)
        .param("sigma_ps", a.sigma)
        .param("poisson", a.poisson)
        .param("seed", seed);
    for o in &outputs {
        manifest.output(o);
    }
    manifest.write(&a.out.join("manifest.json"))
}
