use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use dmdn::channel::{generate_dataset, Dataset};
use dmdn::datapipe::{log_scale, split, ScaledDataset};
use dmdn::mdn::ModelMeta;
use dmdn::metrics::{evaluate, evaluate_distance, overlap_curves};
use dmdn::trainer::{
    initial_weights, load_model, load_saved, save_model_with_optimizer, train_experiment_with_init,
    transfer_train, ModelRegistry,
};

use crate::config::{EvalSettings, GenerateSettings, PlotSettings, TrainSettings, TransferSettings};
use crate::manifest::{manifest_path, read_manifest, ManifestBuilder, RunManifest};
use crate::svg;

/// A finished command: where its manifest went and what it says.
pub struct Done {
    pub manifest_path: PathBuf,
    pub manifest: RunManifest,
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}

fn read_dataset(path: &Path) -> Result<Dataset> {
    Dataset::read_csv(path).with_context(|| format!("loading dataset {}", path.display()))
}

pub fn run_generate(s: &GenerateSettings) -> Result<Done> {
    let ds = generate_dataset(&s.scenario, s.n_per_d, s.seed)?;
    ensure_parent(&s.out)?;
    ds.write_csv(&s.out)?;
    let mut m = ManifestBuilder::new("generate", s.seed, s)?;
    m.outputs.push(s.out.clone());
    let path = manifest_path(&s.out, false);
    Ok(Done {
        manifest: m.write(&path)?,
        manifest_path: path,
    })
}

fn curves_csv(reg: &ModelRegistry) -> String {
    let mut out = String::from("iteration,epoch,train_nll,val_nll,val_avg_oa,val_moa\n");
    for c in &reg.checkpoints {
        let train = c.train_nll.map(|v| format!("{v:.16e}")).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{:.16e},{:.16e},{:.16e}",
            c.iteration, c.epoch, train, c.val_nll, c.val_avg_oa, c.val_moa
        );
    }
    out
}

struct Splits {
    test: Dataset,
    train: ScaledDataset,
    val: ScaledDataset,
}

fn prepare(s: &TrainSettings) -> Result<(Dataset, Splits)> {
    let ds = read_dataset(&s.data)?;
    let (train, val, test) = split(&ds, &s.split)?;
    let splits = Splits {
        train: ScaledDataset::from_dataset(&train)?,
        val: ScaledDataset::from_dataset(&val)?,
        test,
    };
    Ok((ds, splits))
}

/// Writes models, curves, registry, the test split and its evaluation.
/// `meta` overrides the model metadata; by default it describes `ds`.
fn write_experiment(
    command: &'static str,
    s: &TrainSettings,
    settings: &impl serde::Serialize,
    ds: &Dataset,
    splits: &Splits,
    reg: &ModelRegistry,
    meta: Option<ModelMeta>,
    inputs: Vec<PathBuf>,
) -> Result<Done> {
    let out = &s.out;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let meta = meta.unwrap_or_else(|| ModelMeta::for_scenario(&ds.scenario, s.train.seed));
    let mut files = Vec::new();
    for (name, ck) in [("global_best.json", reg.best()), ("global_median.json", reg.median())] {
        let p = out.join(name);
        save_model_with_optimizer(&ck.weights, &meta, ck.optimizer.as_ref(), &p)?;
        files.push(p);
    }
    let p = out.join("curves.csv");
    write(&p, &curves_csv(reg))?;
    files.push(p);
    let p = out.join("registry.json");
    write(&p, &(reg.summary_json() + "\n"))?;
    files.push(p);
    let p = out.join("test.csv");
    splits.test.write_csv(&p)?;
    files.push(p);

    let best = reg.best();
    let report = evaluate(
        &best.weights,
        &meta,
        &splits.test,
        &s.eval_kde,
        s.train.moa_sigma_coef,
        s.eval_seed,
    )?;
    let p = out.join("test_eval.json");
    write(&p, &(report.to_json() + "\n"))?;
    files.push(p);
    let p = out.join("test_eval.csv");
    write(&p, &report.to_csv())?;
    files.push(p);

    let mut m = ManifestBuilder::new(command, s.train.seed, settings)?;
    m.inputs = inputs;
    m.outputs = files;
    m.restarts = Some(reg.restarts());
    for r in &reg.runs {
        if r.restarts > 0 {
            m.notes.push(format!("iteration {}: {} restart(s)", r.iteration, r.restarts));
        }
        if let Some(f) = &r.failure {
            m.notes.push(format!("iteration {} failed: {f}", r.iteration));
        }
    }
    m.notes.push(format!(
        "global best: iteration {} epoch {} val MOA {:.6}; test average OA {:.6}, MOA {:.6}",
        best.iteration, best.epoch, best.val_moa, report.average_oa, report.moa
    ));
    let path = manifest_path(out, true);
    Ok(Done {
        manifest: m.write(&path)?,
        manifest_path: path,
    })
}

pub fn run_train(s: &TrainSettings) -> Result<Done> {
    ensure!(s.train.epochs > 0, "train needs at least one epoch");
    let (ds, splits) = prepare(s)?;
    let cfg = &s.train;
    let init = |it: usize| {
        let mut w = initial_weights(cfg, &splits.train, it)?;
        if s.poison_init && it == 0 {
            w.layers[0].weights[0] = f64::MAX;
        }
        Ok(w)
    };
    let reg = train_experiment_with_init(cfg, &splits.train, &splits.val, &init)?;
    write_experiment("train", s, s, &ds, &splits, &reg, None, vec![s.data.clone()])
}

pub fn run_transfer(t: &TransferSettings) -> Result<Done> {
    let saved = load_saved(&t.model).with_context(|| format!("loading model {}", t.model.display()))?;
    let mut s = t.common.clone();
    s.train.arch = saved.weights.arch;
    let (ds, splits) = prepare(&s)?;
    let optimizer = if t.reset_optimizer { None } else { saved.optimizer.as_ref() };
    let reg = transfer_train(&saved.weights, optimizer, &s.train, &splits.train, &splits.val)?;
    // Untrained transfer re-emits the pretrained model as it was.
    let meta = (s.train.epochs == 0).then(|| saved.meta.clone());
    let inputs = vec![t.model.clone(), s.data.clone()];
    write_experiment("transfer", &s, t, &ds, &splits, &reg, meta, inputs)
}

pub fn run_eval(s: &EvalSettings) -> Result<Done> {
    let (w, meta) = load_model(&s.model).with_context(|| format!("loading model {}", s.model.display()))?;
    let ds = read_dataset(&s.data)?;
    let report = evaluate(&w, &meta, &ds, &s.kde, s.moa_coef, s.seed)?;
    ensure_parent(&s.out)?;
    write(&s.out, &(report.to_json() + "\n"))?;
    let csv = s.out.with_extension("csv");
    write(&csv, &report.to_csv())?;
    let mut m = ManifestBuilder::new("eval", s.seed, s)?;
    m.inputs = vec![s.model.clone(), s.data.clone()];
    m.outputs = vec![s.out.clone(), csv];
    m.notes.push(format!("average OA {:.6}, MOA {:.6}", report.average_oa, report.moa));
    let path = manifest_path(&s.out, false);
    Ok(Done {
        manifest: m.write(&path)?,
        manifest_path: path,
    })
}

fn scaled_at(ds: &Dataset, d: f64, coef: f64) -> Result<Vec<f64>> {
    let values: Vec<f64> = ds
        .samples
        .iter()
        .filter(|x| x.d == d)
        .map(|x| log_scale(x.p_r, coef))
        .collect::<dmdn::Result<_>>()?;
    ensure!(!values.is_empty(), "no samples at d = {d} in the {} dataset", ds.scenario.name);
    Ok(values)
}

pub fn run_plot(s: &PlotSettings) -> Result<Done> {
    let ds = read_dataset(&s.data)?;
    let index = ds
        .scenario
        .grid_index(s.d)
        .with_context(|| format!("distance {} is not on the {} grid", s.d, ds.scenario.name))?;
    let d = ds.scenario.distance_grid[index];
    let (xs, a, b, oa, b_label, second) = match (&s.model, &s.reference) {
        (Some(model), None) => {
            let (w, meta) = load_model(model).with_context(|| format!("loading model {}", model.display()))?;
            let e = evaluate_distance(&w, &meta, &ds, d, &s.kde, s.seed)?;
            (e.xs, e.kde_genuine, e.kde_generated, e.report.oa, "generated", model.clone())
        }
        (None, Some(reference)) => {
            let other = read_dataset(reference)?;
            let coef = ds.scenario.scaling_coef;
            if other.scenario.scaling_coef != coef {
                bail!(
                    "reference scaling coefficient {} differs from the dataset's {coef}",
                    other.scenario.scaling_coef
                );
            }
            let c = overlap_curves(&scaled_at(&ds, d, coef)?, &scaled_at(&other, d, coef)?, &s.kde)?;
            (c.xs, c.genuine, c.generated, c.oa, "reference", reference.clone())
        }
        _ => bail!("plot needs exactly one of a model or a reference dataset"),
    };
    let figure = svg::Figure {
        title: format!("{} at d = {d} m", ds.scenario.name),
        x_label: format!("log10(p + {})", ds.scenario.scaling_coef),
        xs: &xs,
        a: &a,
        b: &b,
        a_label: "genuine",
        b_label,
        oa,
    };
    ensure_parent(&s.out)?;
    write(&s.out, &svg::render(&figure))?;
    let csv = s.out.with_extension("csv");
    let mut text = format!("x,kde_genuine,kde_{b_label}\n");
    for ((x, p), q) in xs.iter().zip(&a).zip(&b) {
        let _ = writeln!(text, "{x:.16e},{p:.16e},{q:.16e}");
    }
    write(&csv, &text)?;
    let mut m = ManifestBuilder::new("plot", s.seed, s)?;
    m.inputs = vec![second, s.data.clone()];
    m.outputs = vec![s.out.clone(), csv];
    m.notes.push(format!("OA = {oa}"));
    let path = manifest_path(&s.out, false);
    Ok(Done {
        manifest: m.write(&path)?,
        manifest_path: path,
    })
}

fn settings_from<T: serde::de::DeserializeOwned>(m: &RunManifest) -> Result<T> {
    serde_json::from_value(m.settings.clone()).with_context(|| format!("manifest settings for `{}`", m.command))
}

/// Result of a replay, one entry per recorded output.
pub struct Replay {
    pub done: Done,
    pub mismatches: Vec<String>,
}

/// Re-runs the manifest's command from its recorded settings, writing to
/// `out` when given (otherwise over the original outputs), and compares
/// output hashes position by position.
pub fn replay(manifest: &Path, out: Option<&Path>) -> Result<Replay> {
    let m = read_manifest(manifest)?;
    let out = out.map(std::path::absolute).transpose()?;
    let done = match m.command.as_str() {
        "generate" => {
            let mut s: GenerateSettings = settings_from(&m)?;
            if let Some(o) = out {
                s.out = o;
            }
            run_generate(&s)?
        }
        "train" => {
            let mut s: TrainSettings = settings_from(&m)?;
            if let Some(o) = out {
                s.out = o;
            }
            run_train(&s)?
        }
        "transfer" => {
            let mut s: TransferSettings = settings_from(&m)?;
            if let Some(o) = out {
                s.common.out = o;
            }
            run_transfer(&s)?
        }
        "eval" => {
            let mut s: EvalSettings = settings_from(&m)?;
            if let Some(o) = out {
                s.out = o;
            }
            run_eval(&s)?
        }
        "plot" => {
            let mut s: PlotSettings = settings_from(&m)?;
            if let Some(o) = out {
                s.out = o;
            }
            run_plot(&s)?
        }
        other => bail!("manifest records unknown command `{other}`"),
    };
    let mut mismatches = Vec::new();
    for r in &m.inputs {
        let now = crate::manifest::sha256_file(&r.path).ok();
        if now.as_deref() != Some(r.sha256.as_str()) {
            mismatches.push(format!("input {} changed since the original run", r.path.display()));
        }
    }
    if m.outputs.len() != done.manifest.outputs.len() {
        mismatches.push(format!(
            "{} outputs recorded, {} produced",
            m.outputs.len(),
            done.manifest.outputs.len()
        ));
    }
    for (a, b) in m.outputs.iter().zip(&done.manifest.outputs) {
        if a.sha256 != b.sha256 {
            mismatches.push(format!("{} differs from recorded {}", b.path.display(), a.path.display()));
        }
    }
    Ok(Replay { done, mismatches })
}
