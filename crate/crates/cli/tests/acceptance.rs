//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use anyhow::{bail, ensure, Context, Result};
use dmdn::channel::{
    generate_dataset, nakagami_m, path_loss_nakagami, sample_nakagami, analytic_moments, ChannelFamily,
    ScenarioConfig, BUILTIN_SCENARIOS,
};
use dmdn::datapipe::ScaledSample;
use dmdn::mdn::{
    init_weights, loss_and_grad, mixture_cdf, mixture_pdf, nll_loss, sample_mixture, Architecture, MixtureParams,
    NetworkWeights, OutputScale, SigmaActivation,
};
use dmdn::metrics::{ks, moa, overlapped_area, scaled_pe, EvalReport, KdeConfig};
use dmdn::rng::rng_from_seed;
use dmdn::trainer::load_model;
use rand::Rng;
use rand_distr::{Distribution, Gamma};

const SEED: &str = "1";
const N_PER_D: &str = "4000";

struct Work {
    dir: PathBuf,
}

impl Work {
    fn p(&self, rel: &str) -> PathBuf {
        self.dir.join(rel)
    }
}

fn dmdn(args: &[&str]) -> Result<String> {
    let out = Command::new(env!("CARGO_BIN_EXE_dmdn")).args(args).output()?;
    let stdout = String::from_utf8_lossy(&out.stdout).into_owned();
    if !out.status.success() {
        bail!(
            "`dmdn {}` exited with {}: {}",
            args.join(" "),
            out.status,
            String::from_utf8_lossy(&out.stderr).trim()
        );
    }
    Ok(stdout)
}

fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

fn report(path: &Path) -> Result<EvalReport> {
    Ok(EvalReport::from_json(&std::fs::read_to_string(path)?)?)
}

fn generate(w: &Work, scenario: &str) -> Result<PathBuf> {
    let out = w.p(&format!("{scenario}.csv"));
    if !out.exists() {
        dmdn(&["generate", "--scenario", scenario, "--n-per-d", N_PER_D, "--seed", SEED, "--out", s(&out)])?;
    }
    Ok(out)
}

/// Desk-scale random-init training: 3 iterations of 15 epochs.
fn train(w: &Work, scenario: &str) -> Result<PathBuf> {
    let run = w.p(&format!("{scenario}_run"));
    if !run.join("manifest.json").exists() {
        let data = generate(w, scenario)?;
        dmdn(&["train", "--data", s(&data), "--iterations", "3", "--seed", SEED, "--out", s(&run)])?;
    }
    Ok(run)
}

/// `(iteration, epoch, val_moa)` rows of a run's curves.
fn curves(run: &Path) -> Result<Vec<(usize, usize, f64)>> {
    let text = std::fs::read_to_string(run.join("curves.csv"))?;
    text.lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            Ok((f[0].parse()?, f[1].parse()?, f[5].parse()?))
        })
        .collect()
}

/// Validation MOA at each epoch, averaged over iterations; indexed by epoch,
/// NaN where a run records none.
fn mean_curve(rows: &[(usize, usize, f64)]) -> Vec<f64> {
    let epochs = rows.iter().map(|r| r.1).max().unwrap_or(0);
    (0..=epochs)
        .map(|e| {
            let v: Vec<f64> = rows.iter().filter(|r| r.1 == e).map(|r| r.2).collect();
            v.iter().sum::<f64>() / v.len() as f64
        })
        .collect()
}

fn c1(w: &Work) -> Result<(bool, String)> {
    let r = report(&train(w, "n1")?.join("test_eval.json"))?;
    Ok((
        r.average_oa >= 0.94 && r.moa >= 0.90,
        format!("N1 test average OA {:.4} (>= 0.94), MOA {:.4} (>= 0.90)", r.average_oa, r.moa),
    ))
}

fn c2(w: &Work) -> Result<(bool, String)> {
    let run = train(w, "n1")?;
    let oa = report(&run.join("test_eval.json"))?.oa_at(250.0).context("no d = 250 in report")?;
    // The figure must show exactly the evaluation's per-distance value.
    let (model, test) = (run.join("global_best.json"), run.join("test.csv"));
    let ev = w.p("c2/eval.json");
    let fig = w.p("c2/d250.svg");
    let common = ["--model", s(&model), "--data", s(&test), "--seed", "7"];
    dmdn(&[&["eval"][..], &common, &["--out", s(&ev)]].concat())?;
    dmdn(&[&["plot"][..], &common, &["--d", "250", "--out", s(&fig)]].concat())?;
    let eval_oa = report(&ev)?.oa_at(250.0).context("no d = 250 in eval")?;
    let svg = std::fs::read_to_string(&fig)?;
    let consistent = svg.contains(&format!("OA = {eval_oa}<"));
    Ok((
        oa >= 0.94 && consistent,
        format!("OA at 250 m {oa:.4} (>= 0.94); plot legend equals eval per-d OA: {consistent}"),
    ))
}

fn c3(w: &Work) -> Result<(bool, String)> {
    let pretrained = train(w, "n1")?.join("global_best.json");
    let random = mean_curve(&curves(&train(w, "n2")?)?);
    let data = generate(w, "n2")?;
    let tr = w.p("n2_transfer");
    dmdn(&[
        "transfer", "--model", s(&pretrained), "--data", s(&data), "--epochs", "1", "--iterations", "3", "--seed",
        SEED, "--out", s(&tr),
    ])?;
    let transfer = mean_curve(&curves(&tr)?);
    let threshold = 0.9 * random[random.len() - 1];
    let crossing = random.iter().skip(1).position(|&m| m >= threshold).map(|i| i + 1);
    let pass = transfer[1] >= threshold && crossing.is_none_or(|e| e >= 3);
    Ok((
        pass,
        format!(
            "threshold {threshold:.4}; transfer epoch-1 MOA {:.4}; random init epochs 1-2 MOA {:.4}, {:.4}, first crossing at epoch {}",
            transfer[1],
            random[1],
            random[2],
            crossing.map_or("never".to_string(), |e| e.to_string())
        ),
    ))
}

fn c4(w: &Work) -> Result<(bool, String)> {
    let a = report(&train(w, "ln1")?.join("test_eval.json"))?;
    let b = report(&train(w, "ln2")?.join("test_eval.json"))?;
    Ok((
        a.average_oa >= 0.92 && b.average_oa >= 0.92,
        format!("LN1 test average OA {:.4}, LN2 {:.4} (>= 0.92)", a.average_oa, b.average_oa),
    ))
}

fn param(w: &mut NetworkWeights, layer: usize, is_bias: bool, i: usize) -> &mut f64 {
    let l = &mut w.layers[layer];
    if is_bias {
        &mut l.bias[i]
    } else {
        &mut l.weights[i]
    }
}

fn c5() -> Result<(bool, String)> {
    let h = 1e-5;
    let mut rng = rng_from_seed(5);
    const FLOOR: f64 = 1e-5;
    let (mut worst, mut worst_abs) = (0.0f64, 0.0f64);
    let mut params = 0;
    let n_arch = 24;
    for k in 0..n_arch {
        let mut arch = Architecture::new(rng.random_range(1..=3), rng.random_range(2..=6), rng.random_range(1..=4));
        if k % 3 == 2 {
            arch.sigma_activation = SigmaActivation::Exp;
        }
        let output = OutputScale {
            shift: rng.random_range(-1.0..1.0),
            scale: rng.random_range(0.2..3.0),
        };
        let mut w = init_weights(arch, 100 + k)?.with_output(output);
        // Nonzero biases keep pre-activations off the ReLU kink.
        for layer in &mut w.layers {
            for b in &mut layer.bias {
                *b = rng.random_range(-0.5..0.5);
            }
        }
        // Distances repeat so both single and grouped inputs are covered.
        let grid: Vec<f64> = (0..3).map(|_| rng.random_range(0.02..1.0)).collect();
        let batch: Vec<ScaledSample> = (0..rng.random_range(6..=16))
            .map(|i| ScaledSample {
                d_norm: if i % 2 == 0 { grid[i % 3] } else { rng.random_range(0.02..1.0) },
                s: output.shift + output.scale * rng.random_range(-2.0..2.0),
            })
            .collect();
        let (_, g) = loss_and_grad(&w, &batch)?;
        for l in 0..w.layers.len() {
            for (is_bias, len) in [(false, w.layers[l].weights.len()), (true, w.layers[l].bias.len())] {
                for i in 0..len {
                    let orig = *param(&mut w, l, is_bias, i);
                    *param(&mut w, l, is_bias, i) = orig + h;
                    let up = nll_loss(&w, &batch)?;
                    *param(&mut w, l, is_bias, i) = orig - h;
                    let down = nll_loss(&w, &batch)?;
                    *param(&mut w, l, is_bias, i) = orig;
                    let numeric = (up - down) / (2.0 * h);
                    let analytic = if is_bias { g.layers[l].bias[i] } else { g.layers[l].weights[i] };
                    // Central differences carry about eps * loss / h of
                    // roundoff, so tinier components are compared at FLOOR.
                    let scale = analytic.abs().max(numeric.abs()).max(FLOOR);
                    worst = worst.max((analytic - numeric).abs() / scale);
                    worst_abs = worst_abs.max((analytic - numeric).abs());
                    params += 1;
                }
            }
        }
    }
    Ok((
        worst < 1e-5,
        format!(
            "{n_arch} architectures, {params} parameters, max relative error {worst:.2e} (< 1e-5, denominator floor {FLOOR:e}), max absolute {worst_abs:.1e}"
        ),
    ))
}

fn random_mixture<R: Rng>(rng: &mut R) -> Result<MixtureParams> {
    let m = rng.random_range(1..=8);
    let raw: Vec<f64> = (0..m).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    Ok(MixtureParams::new(
        raw.iter().map(|a| a / total).collect(),
        (0..m).map(|_| rng.random_range(-3.0..3.0)).collect(),
        (0..m).map(|_| rng.random_range(0.02f64.ln()..2.0f64.ln()).exp()).collect(),
    )?)
}

/// Composite Simpson over a range covering every component to 40 sigma.
fn integrate(p: &MixtureParams) -> f64 {
    let lo = p.mus.iter().zip(&p.sigmas).map(|(m, s)| m - 40.0 * s).fold(f64::INFINITY, f64::min);
    let hi = p.mus.iter().zip(&p.sigmas).map(|(m, s)| m + 40.0 * s).fold(f64::NEG_INFINITY, f64::max);
    let step = p.sigmas.iter().copied().fold(f64::INFINITY, f64::min) / 40.0;
    let n = (((hi - lo) / step).ceil() as usize).next_multiple_of(2);
    let h = (hi - lo) / n as f64;
    let mut sum = mixture_pdf(p, lo) + mixture_pdf(p, hi);
    for i in 1..n {
        sum += if i % 2 == 1 { 4.0 } else { 2.0 } * mixture_pdf(p, lo + h * i as f64);
    }
    sum * h / 3.0
}

fn c6() -> Result<(bool, String)> {
    let mut rng = rng_from_seed(6);
    let n_mix = 100;
    let draws = 1_000_000;
    // Family-wise 1% over the 100 tests.
    let alpha = 0.01 / n_mix as f64;
    let critical = ks::critical_one_sample(draws, alpha);
    let critical_single = ks::critical_one_sample(draws, 0.01);
    let (mut worst_mass, mut worst_ks, mut single_passes) = (0.0f64, 0.0f64, 0);
    for _ in 0..n_mix {
        let p = random_mixture(&mut rng)?;
        worst_mass = worst_mass.max((integrate(&p) - 1.0).abs());
        let xs: Vec<f64> = (0..draws).map(|_| sample_mixture(&p, &mut rng)).collect();
        let d = ks::one_sample(&xs, |x| mixture_cdf(&p, x));
        worst_ks = worst_ks.max(d);
        single_passes += usize::from(d < critical_single);
    }
    Ok((
        worst_mass <= 1e-6 && worst_ks < critical,
        format!(
            "max |mass - 1| {worst_mass:.1e} (<= 1e-6); max KS D {worst_ks:.2e} vs family-wise 1% critical {critical:.2e}; {single_passes}/{n_mix} pass at 1% individually"
        ),
    ))
}

fn c7() -> Result<(bool, String)> {
    let draws = 1_000_000;
    let mut worst_z = 0.0f64;
    let mut checked = 0;
    for name in BUILTIN_SCENARIOS {
        let sc = ScenarioConfig::builtin(name).context("builtin")?;
        for (i, &d) in sc.distance_grid.iter().enumerate() {
            let one = ScenarioConfig {
                distance_grid: vec![d],
                ..sc.clone()
            };
            let ds = generate_dataset(&one, draws, 7000 + i as u64)?;
            let x: Vec<f64> = ds.samples.iter().map(|s| s.p_r).collect();
            let n = x.len() as f64;
            let mean = x.iter().sum::<f64>() / n;
            let m2 = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            let m4 = x.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n;
            let var = m2 * n / (n - 1.0);
            let ideal = analytic_moments(&sc, d)?;
            let z_mean = (mean - ideal.mean).abs() / (m2 / n).sqrt();
            let z_var = (var - ideal.var).abs() / ((m4 - m2 * m2) / n).sqrt();
            worst_z = worst_z.max(z_mean).max(z_var);
            checked += 1;
        }
    }
    // Nakagami sampler against sqrt of a reference Gamma sampler.
    let mut rng = rng_from_seed(77);
    let n = 200_000;
    let critical = ks::critical_two_sample(n, n, 0.01);
    let mut worst_ks = 0.0f64;
    for name in ["N1", "N2"] {
        let sc = ScenarioConfig::builtin(name).context("builtin")?;
        let ChannelFamily::Nakagami(cfg) = &sc.family else { bail!("{name} is not Nakagami") };
        for d in [10.0, 140.0, 150.0, 300.0] {
            let (omega, m) = (path_loss_nakagami(cfg, d)?, nakagami_m(cfg, d));
            let oracle = Gamma::new(m, omega / m)?;
            let a: Vec<f64> = (0..n).map(|_| sample_nakagami(cfg, d, &mut rng)).collect::<dmdn::Result<_>>()?;
            let b: Vec<f64> = (0..n).map(|_| oracle.sample(&mut rng).sqrt()).collect();
            worst_ks = worst_ks.max(ks::two_sample(&a, &b));
        }
    }
    Ok((
        worst_z <= 4.0 && worst_ks < critical,
        format!(
            "{checked} distances, max |z| of mean/variance {worst_z:.2} (<= 4); Nakagami vs Gamma-sqrt KS D {worst_ks:.2e} (critical {critical:.2e})"
        ),
    ))
}

fn c8() -> Result<(bool, String)> {
    let mut rng = rng_from_seed(8);
    let normal = |rng: &mut dmdn::rng::SimRng, n: usize, shift: f64| -> Vec<f64> {
        (0..n).map(|_| shift + rng.sample::<f64, _>(rand_distr::StandardNormal)).collect()
    };
    let cfg = KdeConfig::default();
    let a = normal(&mut rng, 10_000, 0.0);
    let self_oa = overlapped_area(&a, &a, &cfg)?;
    let far = normal(&mut rng, 10_000, 1000.0);
    let disjoint = overlapped_area(&a, &far, &cfg)?;
    let b = normal(&mut rng, 20_000, 0.5);
    let fine = KdeConfig {
        grid_divisor: cfg.grid_divisor / 2,
        ..cfg
    };
    let refinement = (overlapped_area(&a, &b, &cfg)? - overlapped_area(&a, &b, &fine)?).abs();
    let m = moa(&[0.9, 0.9, 0.9], 2.0)?;
    let pe = scaled_pe(10.0, 10.0);
    Ok((
        self_oa >= 0.95 && disjoint < 1e-6 && refinement <= 0.01 && m == 0.9 && pe == 5.0,
        format!(
            "OA(A, A) {self_oa:.4}; disjoint {disjoint:.1e}; |OA(k) - OA(2k)| {refinement:.1e}; moa {m}; scaled_pe {pe}"
        ),
    ))
}

fn c9(w: &Work) -> Result<(bool, String)> {
    let data = w.p("small_n1.csv");
    dmdn(&["generate", "--scenario", "n1", "--n-per-d", "100", "--seed", "9", "--out", s(&data)])?;
    let run = w.p("poisoned");
    dmdn(&[
        "train", "--data", s(&data), "--epochs", "2", "--iterations", "2", "--poison-init", "--seed", "9", "--out",
        s(&run),
    ])?;
    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(run.join("manifest.json"))?)?;
    let restarts = manifest["restarts"].as_u64().context("manifest lacks restarts")?;
    let mut finite = true;
    for name in ["global_best.json", "global_median.json"] {
        let (wts, _) = load_model(&run.join(name))?;
        finite &= wts.layers.iter().all(|l| l.weights.iter().chain(&l.bias).all(|v| v.is_finite()));
        finite &= wts.output.shift.is_finite() && wts.output.scale.is_finite();
    }
    Ok((
        restarts >= 1 && finite,
        format!("run completed; manifest reports {restarts} restart(s); saved weights finite: {finite}"),
    ))
}

fn manifest_of(out: &Path, is_dir: bool) -> PathBuf {
    if is_dir {
        out.join("manifest.json")
    } else {
        PathBuf::from(format!("{}.manifest.json", out.display()))
    }
}

fn c10(w: &Work) -> Result<(bool, String)> {
    // Small instances of every command, each replayed into a fresh location.
    let n2 = w.p("small_n2.csv");
    dmdn(&["generate", "--scenario", "n2", "--n-per-d", "100", "--seed", "10", "--out", s(&n2)])?;
    let tr = w.p("small_transfer");
    dmdn(&[
        "transfer", "--model", s(&w.p("poisoned/global_best.json")), "--data", s(&n2), "--epochs", "1",
        "--iterations", "1", "--seed", "10", "--out", s(&tr),
    ])?;
    let cases: Vec<(&str, PathBuf, PathBuf)> = vec![
        ("generate", w.p("small_n2.csv.manifest.json"), w.p("replay/n2.csv")),
        ("train", w.p("poisoned/manifest.json"), w.p("replay/train")),
        ("transfer", tr.join("manifest.json"), w.p("replay/transfer")),
        ("eval", w.p("c2/eval.json.manifest.json"), w.p("replay/eval.json")),
        ("plot", w.p("c2/d250.svg.manifest.json"), w.p("replay/d250.svg")),
    ];
    let mut failures = Vec::new();
    let mut files = 0;
    for (cmd, manifest, out) in &cases {
        let original: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(manifest)?)?;
        let base = manifest.parent().context("manifest dir")?;
        match dmdn(&["replay", s(manifest), "--out", s(out)]) {
            Ok(_) => {}
            Err(e) => {
                failures.push(format!("{cmd}: {e}"));
                continue;
            }
        }
        let is_dir = matches!(*cmd, "train" | "transfer");
        let replayed: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(manifest_of(out, is_dir))?)?;
        let (a, b) = (original["outputs"].as_array(), replayed["outputs"].as_array());
        let (Some(a), Some(b)) = (a, b) else { bail!("{cmd}: manifest outputs missing") };
        ensure!(a.len() == b.len(), "{cmd}: output count differs");
        let rb = if is_dir { out.as_path() } else { out.parent().context("out dir")? };
        for (x, y) in a.iter().zip(b) {
            let pa = base.join(x["path"].as_str().context("path")?);
            let pb = rb.join(y["path"].as_str().context("path")?);
            if std::fs::read(&pa)? != std::fs::read(&pb)? {
                failures.push(format!("{cmd}: {} differs", pb.display()));
            }
            files += 1;
        }
    }
    Ok((
        failures.is_empty(),
        if failures.is_empty() {
            format!("{} commands replayed, {files} output files byte-identical", cases.len())
        } else {
            failures.join("; ")
        },
    ))
}

type Criterion = dyn Fn(&Work) -> Result<(bool, String)>;

fn main() {
    // `cargo test -- <filter>` passes arguments; skip unless "acceptance" matches.
    let args: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    if !args.is_empty() && !args.iter().any(|a| "acceptance".contains(a.as_str())) {
        return;
    }
    let tmp = tempfile::tempdir().expect("temp dir");
    let w = Work {
        dir: tmp.path().to_path_buf(),
    };
    let criteria: Vec<(&str, Box<Criterion>)> = vec![
        ("1 N1 test OA", Box::new(c1)),
        ("2 N1 local OA at 250 m", Box::new(c2)),
        ("3 transfer convergence", Box::new(c3)),
        ("4 Log-Normal coverage", Box::new(c4)),
        ("5 gradient check", Box::new(|_| c5())),
        ("6 mixture calibration", Box::new(|_| c6())),
        ("7 channel samplers", Box::new(|_| c7())),
        ("8 metric oracles", Box::new(|_| c8())),
        ("9 watchdog", Box::new(c9)),
        ("10 replay determinism", Box::new(c10)),
    ];
    let mut failed = 0;
    for (name, f) in &criteria {
        let t = Instant::now();
        let (pass, detail) = f(&w).unwrap_or_else(|e| (false, format!("error: {e:#}")));
        failed += usize::from(!pass);
        println!(
            "criterion {name}: {} ({detail}) [{:.1}s]",
            if pass { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
