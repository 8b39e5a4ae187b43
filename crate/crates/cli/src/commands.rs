use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use multiprior::bounds::{
    eta_star, gamma_bound, mistake_bound, omega, weight_envelopes, BoundInputs, EtaStarInputs,
    MistakeBoundInputs,
};
use multiprior::config::ExperimentConfig;
use multiprior::engine::run_experiment;
use multiprior::montecarlo::presets::{figure, Figure, PresetOptions};
use multiprior::montecarlo::{emit_results, run_sweep, SweepParam, SweepPoint, SweepSpec};

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    ExperimentConfig::from_json(&text).with_context(|| format!("in {}", path.display()))
}

fn report(written: &[PathBuf]) {
    for p in written {
        println!("{}", p.display());
    }
}

/// Replications of one config; tables keyed by a `run` column of zeros.
pub fn simulate(config: &Path, reps: u64, seed: u64, out: &Path, series: bool, threshold: f64) -> Result<()> {
    let config = load_config(config)?;
    let spec = SweepSpec {
        param: "run".into(),
        points: vec![SweepPoint { value: 0.0, config }],
        replications: reps,
        seed,
        series,
        threshold,
        label: String::new(),
    };
    let frame = run_sweep(&spec)?;
    report(&emit_results(&[frame], out)?);
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn sweep(
    config: &Path,
    param: &str,
    values: &[f64],
    reps: u64,
    seed: u64,
    out: &Path,
    series: bool,
    threshold: f64,
) -> Result<()> {
    let base = load_config(config)?;
    let param = SweepParam::parse(param)?;
    let mut spec = SweepSpec::grid(&base, param, values, reps, seed)?.with_series(series);
    spec.threshold = threshold;
    let frame = run_sweep(&spec)?;
    report(&emit_results(&[frame], out)?);
    Ok(())
}

pub fn figure_tables(which: &str, opts: PresetOptions, out: &Path) -> Result<()> {
    let Some(which) = Figure::parse(which) else {
        let names: Vec<&str> = Figure::ALL.iter().map(Figure::name).collect();
        bail!("unknown figure `{which}`; expected one of {}", names.join(", "));
    };
    let frames = figure(which, opts)?
        .iter()
        .map(run_sweep)
        .collect::<Result<Vec<_>, _>>()?;
    report(&emit_results(&frames, out)?);
    Ok(())
}

/// One run as JSONL: a line per stage and a summary line.
pub fn run(config: &Path, seed: Option<u64>, out: Option<&Path>) -> Result<()> {
    let config = load_config(config)?;
    let result = run_experiment(&config, seed.unwrap_or(config.seed))?;
    match out {
        Some(p) => {
            let file = fs::File::create(p).with_context(|| format!("creating {}", p.display()))?;
            let mut w = std::io::BufWriter::new(file);
            result.write_jsonl(&mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut w = std::io::BufWriter::new(stdout.lock());
            result.write_jsonl(&mut w)?;
            w.flush()?;
        }
    }
    Ok(())
}

#[derive(Deserialize)]
struct OmegaParams {
    a: f64,
    b: f64,
    c: f64,
    e: f64,
}

fn parse<T: for<'de> Deserialize<'de>>(text: &str, what: &str) -> Result<T> {
    serde_json::from_str(text).with_context(|| format!("parsing {what} parameters"))
}

/// Evaluates one bound function; returns `quantity<TAB>value` rows with a header.
pub fn bounds_eval(function: &str, params: &str) -> Result<String> {
    let mut rows: Vec<(String, f64)> = Vec::new();
    match function {
        "omega" => {
            let p: OmegaParams = parse(params, "omega")?;
            rows.push(("omega".into(), omega(p.a, p.b, p.c, p.e)?));
        }
        "gamma" => {
            let p: BoundInputs = parse(params, "gamma")?;
            rows.push(("gamma_upper".into(), gamma_bound(&p)?));
            rows.push(("gamma_lower".into(), gamma_bound(&p.negated())?));
            rows.push(("gamma_abs".into(), gamma_bound(&p.absolute())?));
            for (o, e) in weight_envelopes(&p)?.iter().enumerate() {
                rows.push((format!("ell_lower[{o}]"), e.ell_lower));
                rows.push((format!("ell_upper[{o}]"), e.ell_upper));
                rows.push((format!("alpha_lower[{o}]"), e.alpha_lower));
                rows.push((format!("alpha_upper[{o}]"), e.alpha_upper));
            }
        }
        "eta-star" => {
            let p: EtaStarInputs = parse(params, "eta-star")?;
            rows.push(("eta_star".into(), eta_star(&p)?));
        }
        "mistake-bound" => {
            let p: MistakeBoundInputs = parse(params, "mistake-bound")?;
            let b = mistake_bound(&p)?;
            rows.push(("mistake_bound".into(), b.value));
            rows.push(("saturated".into(), f64::from(u8::from(b.saturated))));
            rows.push(("zero_eta".into(), f64::from(u8::from(b.zero_eta))));
            for w in &b.warnings {
                eprintln!("warning: {w}");
            }
        }
        other => bail!("unknown bound function `{other}`; expected omega, gamma, eta-star or mistake-bound"),
    }
    let mut s = String::from("quantity\tvalue\n");
    for (k, v) in rows {
        s.push_str(&format!("{k}\t{v}\n"));
    }
    Ok(s)
}
