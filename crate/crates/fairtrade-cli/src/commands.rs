//! Subcommand implementations.
//!
//! Every command takes an already-resolved [`PipelineConfig`], stamps its
//! own name into it, and writes the document next to its outputs before any
//! long-running work. Exit semantics: `Ok(SUCCESS)` on a clean run,
//! `Ok(3)` when training aborted numerically but a usable artifact was still
//! written, `Err(_)` otherwise (the caller maps library numeric errors to
//! exit 3 and everything else to exit 2).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};

use fairtrade_core::audit::{self, AuditConfig};
use fairtrade_core::cevae::{
    train_from_schema, CevaeCheckpoint, CevaeModel, ColumnRef, RoleProfile, TrainLog,
};
use fairtrade_core::fairpred::{
    self, build_inputs, outcome_labels, AuxCheckpoint, InputSelection, SelectionPredictor,
};
use fairtrade_core::graph::{self, CausalGraph, Identifiability, PathSet};
use fairtrade_core::metrics::{self, MetricReport};
use fairtrade_core::rng::derive_seed;
use fairtrade_core::scm::{generators, Scm};
use fairtrade_core::{stats, Dataset};

use crate::config::PipelineConfig;

const EXIT_NUMERIC: u8 = 3;

/// `gen-data`: sample a DGP to `<out>.csv` + `<out>.schema.json`.
pub fn gen_data(mut cfg: PipelineConfig) -> Result<ExitCode> {
    cfg.command = Some("gen-data".into());
    let dgp = require_str(&cfg.dgp, "gen-data", "--dgp")?.to_string();
    let n = cfg.n.unwrap_or(1000);
    cfg.n = Some(n);
    let out = data_stem(&require_path(&cfg.out, "gen-data", "--out")?);
    cfg.out = Some(out.clone());

    let scm = resolve_dgp(&dgp)?;
    let ds = scm.sample_dataset(n, stage_seed(cfg.seed, "gen-data"));
    ensure_parent(&out)?;
    cfg.save(&sibling(&out, "config.toml"))?;
    ds.write_csv(&out, cfg.with_noise)?;
    println!("wrote {}.csv and {}.schema.json ({} records)", out.display(), out.display(), n);
    Ok(ExitCode::SUCCESS)
}

/// `train-cevae`: fit the VAE, emitting a checkpoint and per-epoch metrics.
pub fn train_cevae(mut cfg: PipelineConfig) -> Result<ExitCode> {
    cfg.command = Some("train-cevae".into());
    let data = require_path(&cfg.data, "train-cevae", "--data")?;
    let out = require_path(&cfg.out, "train-cevae", "--out")?;
    cfg.train.seed = stage_seed(cfg.seed, "cevae");
    cfg.train.validate()?;

    let ds = Dataset::read_csv(&data_stem(&data))?;
    fs::create_dir_all(&out).with_context(|| format!("cannot create {}", out.display()))?;
    cfg.save(&out.join("config.toml"))?;

    let run = train_from_schema(&cfg.train, &ds)?;
    write_epoch_csv(&out.join("epochs.csv"), &run.log)?;
    write_latent_gap_csv(&out.join("latent_gap.csv"), &run.log)?;
    CevaeCheckpoint::capture(&run.model).save(&out.join("checkpoint.json"))?;

    if let Some(epoch) = run.log.diverged_at {
        eprintln!(
            "training diverged at epoch {epoch}; checkpoint.json holds the last stable epoch"
        );
        return Ok(ExitCode::from(EXIT_NUMERIC));
    }
    if let Some(last) = run.log.epochs.last() {
        println!(
            "trained {} epochs; final bound {:.4} (reg {:.4})",
            run.log.epochs.len(),
            last.terms.total,
            last.terms.reg
        );
    }
    Ok(ExitCode::SUCCESS)
}

/// `train-aux`: fit one input-selection predictor against a VAE checkpoint.
pub fn train_aux(mut cfg: PipelineConfig) -> Result<ExitCode> {
    cfg.command = Some("train-aux".into());
    let ckpt = require_path(&cfg.checkpoint, "train-aux", "--checkpoint")?;
    let data = require_path(&cfg.data, "train-aux", "--data")?;
    let out = require_path(&cfg.out, "train-aux", "--out")?;
    let spec = require_str(&cfg.selection, "train-aux", "--selection")?.to_string();
    cfg.aux.seed = stage_seed(cfg.seed, "aux");
    cfg.aux.validate()?;

    let model = CevaeCheckpoint::load(&ckpt)?.restore()?;
    let ds = Dataset::read_csv(&data_stem(&data))?;
    let selection = parse_selection(&spec, cfg.base_a)?;
    check_selection(&model, &selection)?;

    fs::create_dir_all(&out).with_context(|| format!("cannot create {}", out.display()))?;
    cfg.save(&out.join("config.toml"))?;

    let features = build_inputs(&model, &ds, &selection)?;
    let labels = outcome_labels(&ds)?;
    let outcome = fairpred::train_aux(&features, &labels, selection, &cfg.aux)?;
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    outcome.model.checkpoint().save(&out.join("aux.json"))?;
    write_loss_csv(&out.join("loss.csv"), &outcome.loss_curve)?;

    let preds = outcome.model.predict(&features)?;
    let accuracy = outcome.model.accuracy(&features, &labels)?;
    let a = ds.column(&model.profile.sensitive.name)?;
    let parity = metrics::statistical_parity_score(&preds, a)?;
    let report = serde_json::json!({
        "selection": outcome.model.selection.label(),
        "base_a": outcome.model.selection.base_a(),
        "n": ds.len(),
        "train_accuracy": accuracy,
        "train_statistical_parity": parity,
        "warnings": outcome.warnings,
    });
    write_json(&out.join("report.json"), &report)?;
    println!(
        "aux '{}': train accuracy {accuracy:.4}, statistical parity {parity:.4}",
        outcome.model.selection.label()
    );
    Ok(ExitCode::SUCCESS)
}

/// One point of the sweep grid: a selection evaluated in one repetition.
struct SweepPoint {
    selection: usize,
    accuracy: f64,
    parity: f64,
}

/// `sweep`: train the selection ladder over repeated splits and tabulate
/// accuracy against the statistical-parity score.
pub fn sweep(mut cfg: PipelineConfig) -> Result<ExitCode> {
    cfg.command = Some("sweep".into());
    let ckpt = require_path(&cfg.checkpoint, "sweep", "--checkpoint")?;
    let data = require_path(&cfg.data, "sweep", "--data")?;
    let out = require_path(&cfg.out, "sweep", "--out")?;
    let reps = cfg.reps.unwrap_or(5);
    cfg.reps = Some(reps);
    if reps == 0 {
        bail!("sweep needs at least one repetition");
    }
    if cfg.jobs == 0 {
        bail!("--jobs must be at least 1");
    }
    if !(cfg.train_frac > 0.0 && cfg.train_frac < 1.0) {
        bail!("--train-frac must be strictly between 0 and 1");
    }
    cfg.aux.validate()?;

    let model = CevaeCheckpoint::load(&ckpt)?.restore()?;
    let ds = Dataset::read_csv(&data_stem(&data))?;
    let specs: Vec<String> = if cfg.selections.is_empty() {
        InputSelection::standard_sweep(cfg.base_a.unwrap_or(0.0))?
            .iter()
            .map(InputSelection::label)
            .collect()
    } else {
        cfg.selections.clone()
    };
    cfg.selections = specs.clone();
    let mut selections = Vec::with_capacity(specs.len());
    for spec in &specs {
        let sel = parse_selection(spec, cfg.base_a)?;
        check_selection(&model, &sel)?;
        selections.push(sel);
    }

    fs::create_dir_all(&out).with_context(|| format!("cannot create {}", out.display()))?;
    cfg.save(&out.join("config.toml"))?;

    let a_name = model.profile.sensitive.name.clone();
    let rep_work = |r: usize| -> Result<Vec<SweepPoint>> {
        let (train, test) = ds.split(cfg.train_frac, stage_seed(cfg.seed, &format!("sweep/rep/{r}")));
        let labels_train = outcome_labels(&train)?;
        let labels_test = outcome_labels(&test)?;
        let a_test = test.column(&a_name)?;
        let mut points = Vec::with_capacity(selections.len());
        for (i, sel) in selections.iter().enumerate() {
            let mut aux_cfg = cfg.aux.clone();
            aux_cfg.seed = stage_seed(cfg.seed, &format!("sweep/rep/{r}/{}", sel.label()));
            let feats_train = build_inputs(&model, &train, sel)?;
            let fitted = fairpred::train_aux(&feats_train, &labels_train, sel.clone(), &aux_cfg)?;
            let feats_test = build_inputs(&model, &test, sel)?;
            let preds = fitted.model.predict(&feats_test)?;
            points.push(SweepPoint {
                selection: i,
                accuracy: fitted.model.accuracy(&feats_test, &labels_test)?,
                parity: metrics::statistical_parity_score(&preds, a_test)?,
            });
        }
        Ok(points)
    };
    let rep_points = run_repetitions(reps, cfg.jobs, &rep_work)?;

    write_curve_csv(&out.join("curve.csv"), &specs, &rep_points)?;
    let mut table = Vec::with_capacity(specs.len());
    for (i, spec) in specs.iter().enumerate() {
        let acc: Vec<f64> = rep_points
            .iter()
            .flatten()
            .filter(|p| p.selection == i)
            .map(|p| p.accuracy)
            .collect();
        let par: Vec<f64> = rep_points
            .iter()
            .flatten()
            .filter(|p| p.selection == i)
            .map(|p| p.parity)
            .collect();
        table.push((
            spec.clone(),
            stats::mean(&acc),
            stats::std_dev(&acc),
            stats::mean(&par),
            stats::std_dev(&par),
        ));
    }
    write_sweep_csv(&out.join("sweep.csv"), &table)?;
    println!("selection            accuracy           sp_score");
    for (spec, am, asd, pm, psd) in &table {
        println!("{spec:<20} {am:.4} ± {asd:.4}    {pm:.4} ± {psd:.4}");
    }
    Ok(ExitCode::SUCCESS)
}

/// `eval`: score a trained aux model; oracle metrics resample from a DGP.
pub fn eval(mut cfg: PipelineConfig) -> Result<ExitCode> {
    cfg.command = Some("eval".into());
    let ckpt = require_path(&cfg.checkpoint, "eval", "--checkpoint")?;
    let aux_path = require_path(&cfg.aux_model, "eval", "--aux-model")?;
    let data = require_path(&cfg.data, "eval", "--data")?;
    let out = require_path(&cfg.out, "eval", "--out")?;
    let wanted: Vec<String> = if cfg.metrics.is_empty() {
        vec!["accuracy".into(), "sp".into()]
    } else {
        cfg.metrics.clone()
    };
    cfg.metrics = wanted.clone();

    let model = CevaeCheckpoint::load(&ckpt)?.restore()?;
    let aux = AuxCheckpoint::load(&aux_path)?.restore()?;
    check_selection(&model, &aux.selection)?;
    let ds = Dataset::read_csv(&data_stem(&data))?;
    let features = build_inputs(&model, &ds, &aux.selection)?;
    let labels = outcome_labels(&ds)?;
    let a = ds.column(&model.profile.sensitive.name)?;

    let oracle_n = cfg.n.unwrap_or(1000);
    let oracle_seed = stage_seed(cfg.seed, "eval/oracle");
    let predictor = SelectionPredictor { cevae: &model, aux: &aux };

    let mut reports = Vec::with_capacity(wanted.len());
    for name in &wanted {
        let report = match name.as_str() {
            "accuracy" => MetricReport {
                metric: "accuracy".into(),
                mode: None,
                value: aux.accuracy(&features, &labels)?,
                n: ds.len(),
                seed: None,
                stderr: None,
            },
            "sp" | "statistical-parity" => MetricReport {
                metric: "statistical_parity".into(),
                mode: None,
                value: metrics::statistical_parity_score(&aux.predict(&features)?, a)?,
                n: ds.len(),
                seed: None,
                stderr: None,
            },
            "oracle-cf" => {
                cfg.n = Some(oracle_n);
                let scm = resolve_dgp(require_str(&cfg.dgp, "eval", "--dgp")?)?;
                MetricReport {
                    metric: "oracle_cf".into(),
                    mode: Some("mean_abs".into()),
                    value: metrics::oracle_cf(&predictor, &scm, oracle_n, oracle_seed)?,
                    n: oracle_n,
                    seed: Some(oracle_seed),
                    stderr: None,
                }
            }
            "oracle-pscf" => {
                cfg.n = Some(oracle_n);
                let scm = resolve_dgp(require_str(&cfg.dgp, "eval", "--dgp")?)?;
                let pi = parse_paths(require_str(&cfg.paths, "eval", "--paths")?)?;
                MetricReport {
                    metric: "oracle_pscf".into(),
                    mode: Some("mean_abs".into()),
                    value: metrics::oracle_pscf(&predictor, &scm, &pi, oracle_n, oracle_seed)?,
                    n: oracle_n,
                    seed: Some(oracle_seed),
                    stderr: None,
                }
            }
            other => bail!(
                "unknown metric '{other}'; valid metrics are accuracy, sp, oracle-cf, oracle-pscf"
            ),
        };
        reports.push(report);
    }

    fs::create_dir_all(&out).with_context(|| format!("cannot create {}", out.display()))?;
    cfg.save(&out.join("config.toml"))?;
    let doc = serde_json::to_value(&reports).context("metric serialization failed")?;
    write_json(&out.join("metrics.json"), &doc)?;
    for r in &reports {
        println!("{} = {:.6}", r.metric, r.value);
    }
    Ok(ExitCode::SUCCESS)
}

/// `pse`: Monte-Carlo path-specific effect on a ground-truth SCM.
pub fn pse(mut cfg: PipelineConfig) -> Result<ExitCode> {
    cfg.command = Some("pse".into());
    let dgp = require_str(&cfg.dgp, "pse", "--dgp")?.to_string();
    let spec = require_str(&cfg.paths, "pse", "--paths")?.to_string();
    let n = cfg.n.unwrap_or(100_000);
    cfg.n = Some(n);
    let seed = stage_seed(cfg.seed, "pse");

    let scm = resolve_dgp(&dgp)?;
    let pi = parse_paths(&spec)?;
    let est = scm.pse(&pi, cfg.a_active, cfg.a_base, n, seed)?;
    let doc = serde_json::json!({
        "dgp": dgp,
        "paths": path_labels(&pi),
        "a_active": cfg.a_active,
        "a_base": cfg.a_base,
        "n": est.n,
        "seed": seed,
        "value": est.value,
        "stderr": est.stderr,
    });
    emit_report(&cfg, &doc)?;
    Ok(ExitCode::SUCCESS)
}

/// `identifiability`: recanting-witness check for a path set.
pub fn identifiability(mut cfg: PipelineConfig) -> Result<ExitCode> {
    cfg.command = Some("identifiability".into());
    let name = require_str(&cfg.graph, "identifiability", "--graph")?.to_string();
    let spec = cfg.paths.clone().unwrap_or_default();
    cfg.paths = Some(spec.clone());

    let g = resolve_graph(&name)?;
    let pi = parse_paths(&spec)?;
    let verdict = g.check_identifiability(&pi)?;
    let (identifiable, witness) = match verdict {
        Identifiability::Identifiable => (true, None),
        Identifiability::NonIdentifiable { witness } => (false, Some(witness)),
    };
    let doc = serde_json::json!({
        "graph": name,
        "paths": path_labels(&pi),
        "identifiable": identifiable,
        "witness": witness,
    });
    emit_report(&cfg, &doc)?;
    Ok(ExitCode::SUCCESS)
}

/// `audit`: reconstruction-based counterfactual audit of a black-box model.
pub fn audit(mut cfg: PipelineConfig) -> Result<ExitCode> {
    cfg.command = Some("audit".into());
    let ckpt = require_path(&cfg.checkpoint, "audit", "--checkpoint")?;
    let data = require_path(&cfg.data, "audit", "--data")?;
    let out = require_path(&cfg.out, "audit", "--out")?;
    let spec = require_str(&cfg.adapter, "audit", "--adapter")?.to_string();
    let reps = cfg.reps.unwrap_or(20);
    cfg.reps = Some(reps);
    if !(cfg.train_frac > 0.0 && cfg.train_frac < 1.0) {
        bail!("--train-frac must be strictly between 0 and 1");
    }

    let model = CevaeCheckpoint::load(&ckpt)?.restore()?;
    let ds = Dataset::read_csv(&data_stem(&data))?;
    let (adapter, test) = build_adapter(&mut cfg, &model, &ds, &spec)?;

    ensure_parent(&out)?;
    cfg.save(&sibling(&out, "config.toml"))?;
    let report = audit::run_audit(
        &model,
        &test,
        &adapter,
        &AuditConfig { reps, seed: stage_seed(cfg.seed, "audit") },
    )?;
    fs::write(&out, report.to_json()?)
        .with_context(|| format!("cannot write {}", out.display()))?;
    println!(
        "audited '{}' on {} records x {} reps: cf(mean_abs) {:.4} ± {:.4}, cf(flip_rate) {:.4} ± {:.4}, sp {:.4}",
        report.model,
        report.n,
        report.reps,
        report.cf_mean_abs.mean,
        report.cf_mean_abs.std,
        report.cf_flip_rate.mean,
        report.cf_flip_rate.std,
        report.statistical_parity.mean,
    );
    if let Some(w) = &report.sanity.warning {
        eprintln!("warning: {w}");
    }
    Ok(ExitCode::SUCCESS)
}

/// Resolve an adapter spec, training builtin reference models on a split of
/// `ds` (external commands are taken as already trained and audited on the
/// whole file).
fn build_adapter(
    cfg: &mut PipelineConfig,
    model: &CevaeModel,
    ds: &Dataset,
    spec: &str,
) -> Result<(audit::BlackBoxAdapter, Dataset)> {
    if let Some(rest) = spec.strip_prefix("cmd:") {
        let argv: Vec<String> = rest.split_whitespace().map(str::to_string).collect();
        let (_, names) = audit::feature_matrix(ds)?;
        let adapter =
            audit::external_adapter(argv, names, Duration::from_secs(cfg.timeout_secs))?;
        return Ok((adapter, ds.clone()));
    }
    let Some(name) = spec.strip_prefix("builtin:") else {
        bail!(
            "adapter '{spec}' is neither builtin:<lr|lr_fixed_a|random_forest> nor cmd:<command>"
        );
    };
    let (train, test) = ds.split(cfg.train_frac, stage_seed(cfg.seed, "audit/split"));
    let (rows, names) = audit::feature_matrix(&train)?;
    let labels = outcome_labels(&train)?;
    let adapter = match name {
        "lr" => {
            cfg.aux.seed = stage_seed(cfg.seed, "audit/fit");
            audit::train_lr(&rows, &labels, &names, &cfg.aux)?
        }
        "lr_fixed_a" => {
            cfg.aux.seed = stage_seed(cfg.seed, "audit/fit");
            audit::train_lr_fixed_a(
                &rows,
                &labels,
                &names,
                &model.profile.sensitive.name,
                &cfg.aux,
            )?
        }
        "random_forest" => {
            cfg.forest.seed = stage_seed(cfg.seed, "audit/forest");
            audit::train_rf(&rows, &labels, &names, &cfg.forest)?
        }
        other => bail!(
            "unknown builtin adapter '{other}'; choose lr, lr_fixed_a, or random_forest"
        ),
    };
    Ok((adapter, test))
}

// ---------------------------------------------------------------------------
// Shared plumbing.

/// Stage seeds derive from the master seed by name, masked into the i64
/// range so the resolved config document stays TOML-representable.
fn stage_seed(master: u64, name: &str) -> u64 {
    derive_seed(master, name) & (i64::MAX as u64)
}

fn require_str<'a>(field: &'a Option<String>, cmd: &str, flag: &str) -> Result<&'a str> {
    field
        .as_deref()
        .ok_or_else(|| anyhow!("{cmd} needs {flag} (or the matching config-file field)"))
}

fn require_path(field: &Option<PathBuf>, cmd: &str, flag: &str) -> Result<PathBuf> {
    field
        .clone()
        .ok_or_else(|| anyhow!("{cmd} needs {flag} (or the matching config-file field)"))
}

/// Accept dataset arguments with or without the `.csv` extension.
fn data_stem(path: &Path) -> PathBuf {
    if path.extension().is_some_and(|e| e == "csv") {
        path.with_extension("")
    } else {
        path.to_path_buf()
    }
}

/// `report.json` → `report.config.toml`; extensionless stems gain the suffix.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    path.with_extension(suffix)
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        }
    }
    Ok(())
}

/// Builtin DGP lookup, extended with `chain:<alpha>,<beta>,<gamma>` — the
/// three-node linear chain whose path effects have closed forms.
fn resolve_dgp(name: &str) -> Result<Scm> {
    if let Some(spec) = name.strip_prefix("chain:") {
        let parts: Vec<&str> = spec.split(',').collect();
        if parts.len() != 3 {
            bail!("chain DGP needs three coefficients, e.g. chain:0.8,0.5,0.3");
        }
        let mut coef = [0.0f64; 3];
        for (slot, part) in coef.iter_mut().zip(&parts) {
            *slot = part
                .trim()
                .parse()
                .with_context(|| format!("bad chain coefficient '{}'", part.trim()))?;
        }
        return Ok(generators::chain_linear(coef[0], coef[1], coef[2]));
    }
    Ok(generators::builtin(name)?)
}

/// Builtin graph name, or a JSON graph document on disk.
fn resolve_graph(name: &str) -> Result<CausalGraph> {
    match graph::builtin(name) {
        Ok(g) => Ok(g),
        Err(builtin_err) => {
            let path = Path::new(name);
            if path.exists() {
                let text = fs::read_to_string(path)
                    .with_context(|| format!("cannot read graph {}", path.display()))?;
                Ok(CausalGraph::from_json(&text)?)
            } else {
                Err(builtin_err.into())
            }
        }
    }
}

/// Comma-separated path specs (`"A>X>Y,A>Y"`); empty input is the empty set.
fn parse_paths(spec: &str) -> Result<PathSet> {
    let mut set = PathSet::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        set.insert(graph::Path::parse(part)?);
    }
    Ok(set)
}

fn path_labels(pi: &PathSet) -> Vec<String> {
    pi.iter().map(graph::Path::display).collect()
}

/// Parse a selection, supplying `base_a` only where `R*` makes it meaningful.
fn parse_selection(spec: &str, base_a: Option<f64>) -> Result<InputSelection> {
    let wants_base = spec.to_ascii_uppercase().contains("R*");
    if wants_base && base_a.is_none() {
        bail!("selection '{spec}' uses R*; pass --base-a 0 or --base-a 1");
    }
    Ok(InputSelection::parse(spec, if wants_base { base_a } else { None })?)
}

/// Reject selections naming role groups this model does not have, listing
/// what it does have.
fn check_selection(model: &CevaeModel, selection: &InputSelection) -> Result<()> {
    if let Err(e) = fairpred::selection_width(model, selection) {
        bail!(
            "selection '{}' is not valid for this model: {e}; {}",
            selection.label(),
            describe_columns(&model.profile)
        );
    }
    Ok(())
}

fn describe_columns(profile: &RoleProfile) -> String {
    let list = |cols: &[ColumnRef]| -> String {
        if cols.is_empty() {
            "(none)".into()
        } else {
            cols.iter().map(|c| c.name.as_str()).collect::<Vec<_>>().join(", ")
        }
    };
    format!(
        "valid columns are — sensitive: {}; base: {}; covariates: {}; resolving: {}; outcome: {}",
        profile.sensitive.name,
        list(&profile.base),
        list(&profile.covariates),
        list(&profile.resolving),
        profile.outcome.name
    )
}

/// Run `reps` independent repetitions, optionally across worker threads.
/// Results come back in repetition order regardless of scheduling.
fn run_repetitions<T: Send>(
    reps: usize,
    jobs: usize,
    work: &(dyn Fn(usize) -> Result<T> + Sync),
) -> Result<Vec<T>> {
    if jobs <= 1 || reps <= 1 {
        return (0..reps).map(work).collect();
    }
    let workers = jobs.min(reps);
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|t| {
                scope.spawn(move || -> Result<Vec<(usize, T)>> {
                    (t..reps).step_by(workers).map(|r| Ok((r, work(r)?))).collect()
                })
            })
            .collect();
        let mut slots: Vec<Option<T>> = Vec::with_capacity(reps);
        slots.resize_with(reps, || None);
        for handle in handles {
            let batch = handle.join().map_err(|_| anyhow!("repetition worker panicked"))??;
            for (r, value) in batch {
                slots[r] = Some(value);
            }
        }
        slots
            .into_iter()
            .map(|s| s.ok_or_else(|| anyhow!("repetition result missing")))
            .collect()
    })
}

/// Print a JSON report; with `--out` also write it plus the resolved config.
fn emit_report(cfg: &PipelineConfig, doc: &serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(doc).context("report serialization failed")?;
    println!("{text}");
    if let Some(out) = &cfg.out {
        ensure_parent(out)?;
        cfg.save(&sibling(out, "config.toml"))?;
        fs::write(out, text).with_context(|| format!("cannot write {}", out.display()))?;
    }
    Ok(())
}

fn write_json(path: &Path, doc: &serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(doc).context("report serialization failed")?;
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn write_epoch_csv(path: &Path, log: &TrainLog) -> Result<()> {
    let mut w = csv::Writer::from_path(path)
        .with_context(|| format!("cannot write {}", path.display()))?;
    w.write_record(["epoch", "reg", "rec_x", "rec_r", "rec_y", "total"])?;
    for e in &log.epochs {
        w.write_record([
            e.epoch.to_string(),
            e.terms.reg.to_string(),
            e.terms.rec_x.to_string(),
            e.terms.rec_r.to_string(),
            e.terms.rec_y.to_string(),
            e.terms.total.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn write_latent_gap_csv(path: &Path, log: &TrainLog) -> Result<()> {
    let mut w = csv::Writer::from_path(path)
        .with_context(|| format!("cannot write {}", path.display()))?;
    w.write_record(["epoch", "latent_gap"])?;
    for e in &log.epochs {
        w.write_record([e.epoch.to_string(), e.latent_gap.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn write_loss_csv(path: &Path, curve: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)
        .with_context(|| format!("cannot write {}", path.display()))?;
    w.write_record(["epoch", "loss"])?;
    for (i, loss) in curve.iter().enumerate() {
        w.write_record([(i + 1).to_string(), loss.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn write_sweep_csv(path: &Path, table: &[(String, f64, f64, f64, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)
        .with_context(|| format!("cannot write {}", path.display()))?;
    w.write_record(["selection", "accuracy_mean", "accuracy_std", "sp_mean", "sp_std"])?;
    for (spec, am, asd, pm, psd) in table {
        w.write_record([
            spec.clone(),
            am.to_string(),
            asd.to_string(),
            pm.to_string(),
            psd.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn write_curve_csv(path: &Path, specs: &[String], rep_points: &[Vec<SweepPoint>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)
        .with_context(|| format!("cannot write {}", path.display()))?;
    w.write_record(["selection", "rep", "accuracy", "sp_score"])?;
    for (r, points) in rep_points.iter().enumerate() {
        for p in points {
            w.write_record([
                specs[p.selection].clone(),
                r.to_string(),
                p.accuracy.to_string(),
                p.parity.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
