use serde::{Deserialize, Serialize};

use super::adam::AdamState;
use super::registry::{Checkpoint, ModelRegistry, RunSummary};
use crate::datapipe::{batches, ScaledDataset};
use crate::mdn::{init_weights, loss_and_grad, nll_loss, Architecture, NetworkWeights, OutputScale};
use crate::metrics::{moa, oa_by_distance, sample_stats, KdeConfig};
use crate::rng::derive_seed;
use crate::{Error, Result};

// seed path tags
const TAG_INIT: u64 = 0;
const TAG_RESTART: u64 = 1;
const TAG_SHUFFLE: u64 = 2;
const TAG_VAL: u64 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub iterations: usize,
    pub batch_size: usize,
    pub max_nan_restarts: usize,
    pub seed: u64,
    pub moa_sigma_coef: f64,
    pub lr: f64,
    /// Fit the network's output affine to the training targets before
    /// random-init training.
    pub standardize_output: bool,
    /// Store the Adam state in every checkpoint so transfer can resume it.
    pub keep_optimizer_state: bool,
    pub arch: Architecture,
    pub kde: KdeConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 15,
            iterations: 10,
            batch_size: 10_000,
            max_nan_restarts: 10,
            seed: 0,
            moa_sigma_coef: 2.0,
            lr: 0.005,
            standardize_output: true,
            keep_optimizer_state: true,
            arch: Architecture::default(),
            kde: KdeConfig::default(),
        }
    }
}

impl TrainConfig {
    /// `epochs` may be zero (identity run); the other counts may not.
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 || self.batch_size == 0 {
            return Err(Error::Config("iterations and batch_size must be at least 1".into()));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.lr)));
        }
        if !self.moa_sigma_coef.is_finite() {
            return Err(Error::Config("moa_sigma_coef must be finite".into()));
        }
        self.arch.validate()?;
        self.kde.validate()
    }
}

/// Why a run was discarded and started over.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartEvent {
    pub attempt: usize,
    pub epoch: usize,
    pub batch: Option<usize>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub checkpoints: Vec<Checkpoint>,
    pub weights: NetworkWeights,
    pub optimizer: Option<AdamState>,
    pub restarts: Vec<RestartEvent>,
}

struct Failure {
    epoch: usize,
    batch: Option<usize>,
    reason: String,
}

/// Validation scores of `w`; non-finite anything is an error.
fn score(
    w: &NetworkWeights,
    cfg: &TrainConfig,
    val: &ScaledDataset,
    seed: u64,
) -> Result<(f64, f64, f64, Vec<f64>)> {
    let val_nll = nll_loss(w, &val.samples)?;
    let per_d = oa_by_distance(w, &val.by_distance(), &cfg.kde, seed)?;
    let avg = if per_d.len() >= 2 {
        sample_stats(&per_d)?.0
    } else {
        per_d.first().copied().unwrap_or(0.0)
    };
    let m = if per_d.len() >= 2 { moa(&per_d, cfg.moa_sigma_coef)? } else { avg };
    if !(val_nll.is_finite() && avg.is_finite() && m.is_finite()) {
        return Err(Error::NonFinite("validation score".into()));
    }
    Ok((val_nll, avg, m, per_d))
}

fn checkpoint(
    w: &NetworkWeights,
    optimizer: Option<&AdamState>,
    cfg: &TrainConfig,
    val: &ScaledDataset,
    iteration: usize,
    attempt: usize,
    epoch: usize,
    train_nll: Option<f64>,
) -> Result<Checkpoint> {
    let seed = derive_seed(cfg.seed, &[TAG_VAL, iteration as u64, attempt as u64, epoch as u64]);
    let (val_nll, val_avg_oa, val_moa, val_oa_per_d) = score(w, cfg, val, seed)?;
    Ok(Checkpoint {
        iteration,
        epoch,
        train_nll,
        val_nll,
        val_avg_oa,
        val_moa,
        val_oa_per_d,
        weights: w.clone(),
        optimizer: optimizer.filter(|_| cfg.keep_optimizer_state).cloned(),
    })
}

fn attempt_run(
    cfg: &TrainConfig,
    train: &ScaledDataset,
    val: &ScaledDataset,
    mut w: NetworkWeights,
    mut adam: AdamState,
    iteration: usize,
    attempt: usize,
    last_finite: &mut Option<f64>,
    faults: &dyn Fn(usize, usize, usize) -> bool,
) -> std::result::Result<(Vec<Checkpoint>, NetworkWeights, AdamState), Failure> {
    let fail = |epoch, batch, e: Error| Failure {
        epoch,
        batch,
        reason: e.to_string(),
    };
    let mut out = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        let seed = derive_seed(cfg.seed, &[TAG_SHUFFLE, iteration as u64, attempt as u64, epoch as u64]);
        let bs = batches(&train.samples, cfg.batch_size, seed).map_err(|e| fail(epoch, None, e))?;
        let (mut sum, mut count) = (0.0, 0usize);
        for (b, batch) in bs.iter().enumerate() {
            let (loss, g) = loss_and_grad(&w, batch).map_err(|e| fail(epoch, Some(b), e))?;
            if faults(attempt, epoch, b) || !loss.is_finite() {
                return Err(fail(epoch, Some(b), Error::NonFinite(format!("loss {loss}"))));
            }
            *last_finite = Some(loss);
            adam.step(&mut w, &g).map_err(|e| fail(epoch, Some(b), e))?;
            sum += loss * batch.len() as f64;
            count += batch.len();
        }
        let train_nll = (count > 0).then(|| sum / count as f64);
        let ck = checkpoint(&w, Some(&adam), cfg, val, iteration, attempt, epoch, train_nll)
            .map_err(|e| fail(epoch, None, e))?;
        out.push(ck);
    }
    Ok((out, w, adam))
}

/// One training run with the restart watchdog, from a fresh optimizer.
pub fn train_run(
    cfg: &TrainConfig,
    train: &ScaledDataset,
    val: &ScaledDataset,
    init: NetworkWeights,
    iteration: usize,
) -> Result<RunOutcome> {
    train_run_from(cfg, train, val, init, None, iteration)
}

/// `train_run` continuing from `optimizer` when given (its learning rate is
/// replaced by `cfg.lr`). Watchdog restarts always start a fresh optimizer.
pub fn train_run_from(
    cfg: &TrainConfig,
    train: &ScaledDataset,
    val: &ScaledDataset,
    init: NetworkWeights,
    optimizer: Option<&AdamState>,
    iteration: usize,
) -> Result<RunOutcome> {
    train_run_with_faults(cfg, train, val, init, optimizer, iteration, &|_, _, _| false)
}

/// `train_run_from` where `faults(attempt, epoch, batch)` returning true
/// makes that batch's loss count as non-finite.
#[doc(hidden)]
pub fn train_run_with_faults(
    cfg: &TrainConfig,
    train: &ScaledDataset,
    val: &ScaledDataset,
    init: NetworkWeights,
    optimizer: Option<&AdamState>,
    iteration: usize,
    faults: &dyn Fn(usize, usize, usize) -> bool,
) -> Result<RunOutcome> {
    cfg.validate()?;
    if let Some(opt) = optimizer {
        if !(opt.m.same_shape(&init) && opt.v.same_shape(&init)) {
            return Err(Error::Config("optimizer state does not match the initial weights".into()));
        }
    }
    if cfg.epochs == 0 {
        return Ok(RunOutcome {
            checkpoints: vec![],
            weights: init,
            optimizer: optimizer.cloned(),
            restarts: vec![],
        });
    }
    if train.is_empty() || val.is_empty() {
        return Err(Error::Size("training and validation sets must be nonempty".into()));
    }
    let (arch, output) = (init.arch, init.output);
    let mut restarts = Vec::new();
    let mut last_finite = None;
    for attempt in 0..=cfg.max_nan_restarts {
        let (w, adam) = if attempt == 0 {
            let adam = match optimizer {
                Some(opt) => AdamState {
                    lr: cfg.lr,
                    ..opt.clone()
                },
                None => AdamState::new(&init, cfg.lr),
            };
            (init.clone(), adam)
        } else {
            let w = init_weights(arch, derive_seed(cfg.seed, &[TAG_RESTART, iteration as u64, attempt as u64]))?
                .with_output(output);
            let adam = AdamState::new(&w, cfg.lr);
            (w, adam)
        };
        match attempt_run(cfg, train, val, w, adam, iteration, attempt, &mut last_finite, faults) {
            Ok((checkpoints, weights, adam)) => {
                return Ok(RunOutcome {
                    checkpoints,
                    weights,
                    optimizer: Some(adam),
                    restarts,
                })
            }
            Err(f) => {
                restarts.push(RestartEvent {
                    attempt,
                    epoch: f.epoch,
                    batch: f.batch,
                    reason: f.reason,
                });
            }
        }
    }
    let last = restarts.last().expect("at least one failed attempt");
    Err(Error::Training {
        restarts: cfg.max_nan_restarts,
        reason: last.reason.clone(),
        last_finite_loss: last_finite,
        epoch: last.epoch,
        batch: last.batch,
    })
}

type Start = (NetworkWeights, Option<AdamState>);

fn run_all(
    cfg: &TrainConfig,
    train: &ScaledDataset,
    val: &ScaledDataset,
    start: &dyn Fn(usize) -> Result<Start>,
) -> Result<ModelRegistry> {
    cfg.validate()?;
    let mut checkpoints = Vec::new();
    let mut runs = Vec::new();
    let mut last_err = None;
    for it in 0..cfg.iterations {
        let (init, opt) = start(it)?;
        match train_run_from(cfg, train, val, init, opt.as_ref(), it) {
            Ok(out) => {
                runs.push(RunSummary {
                    iteration: it,
                    restarts: out.restarts.len(),
                    failure: None,
                });
                checkpoints.extend(out.checkpoints);
            }
            Err(e @ Error::Training { .. }) => {
                runs.push(RunSummary {
                    iteration: it,
                    restarts: cfg.max_nan_restarts + 1,
                    failure: Some(e.to_string()),
                });
                last_err = Some(e);
            }
            Err(e) => return Err(e),
        }
    }
    match ModelRegistry::new(checkpoints, runs) {
        Some(r) => Ok(r),
        None => Err(last_err.unwrap_or_else(|| Error::Size("no checkpoints produced".into()))),
    }
}

/// The random initialization `train_experiment` uses for `iteration`,
/// including the fitted output affine.
pub fn initial_weights(cfg: &TrainConfig, train: &ScaledDataset, iteration: usize) -> Result<NetworkWeights> {
    let output = if cfg.standardize_output {
        OutputScale::fit(train.samples.iter().map(|s| s.s))
    } else {
        OutputScale::default()
    };
    Ok(init_weights(cfg.arch, derive_seed(cfg.seed, &[TAG_INIT, iteration as u64]))?.with_output(output))
}

/// `iterations` independent runs from fresh random initializations.
pub fn train_experiment(cfg: &TrainConfig, train: &ScaledDataset, val: &ScaledDataset) -> Result<ModelRegistry> {
    train_experiment_with_init(cfg, train, val, &|it| initial_weights(cfg, train, it))
}

/// `train_experiment` with a caller-chosen initialization per iteration.
pub fn train_experiment_with_init(
    cfg: &TrainConfig,
    train: &ScaledDataset,
    val: &ScaledDataset,
    init: &dyn Fn(usize) -> Result<NetworkWeights>,
) -> Result<ModelRegistry> {
    if cfg.epochs == 0 {
        return Err(Error::Config("train_experiment needs at least one epoch".into()));
    }
    run_all(cfg, train, val, &|it| Ok((init(it)?, None)))
}

/// Like `train_experiment`, with every iteration starting from
/// `pretrained` and, when given, its optimizer state. With zero epochs the
/// registry holds one epoch-0 checkpoint carrying `pretrained` unchanged.
pub fn transfer_train(
    pretrained: &NetworkWeights,
    optimizer: Option<&AdamState>,
    cfg: &TrainConfig,
    train: &ScaledDataset,
    val: &ScaledDataset,
) -> Result<ModelRegistry> {
    cfg.validate()?;
    if pretrained.arch != cfg.arch {
        return Err(Error::Config(format!(
            "pretrained architecture {:?} does not match configured {:?}",
            pretrained.arch, cfg.arch
        )));
    }
    pretrained.validate()?;
    if cfg.epochs == 0 {
        if val.is_empty() {
            return Err(Error::Size("validation set must be nonempty".into()));
        }
        let ck = checkpoint(pretrained, optimizer, cfg, val, 0, 0, 0, None)?;
        let runs = vec![RunSummary {
            iteration: 0,
            restarts: 0,
            failure: None,
        }];
        return Ok(ModelRegistry::new(vec![ck], runs).expect("one checkpoint"));
    }
    run_all(cfg, train, val, &|_| Ok((pretrained.clone(), optimizer.cloned())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{generate_dataset, ScenarioConfig};
    use crate::datapipe::ScaledDataset;

    fn small_cfg() -> TrainConfig {
        TrainConfig {
            epochs: 3,
            iterations: 2,
            batch_size: 500,
            seed: 11,
            arch: Architecture::new(2, 16, 3),
            ..TrainConfig::default()
        }
    }

    fn data(seed: u64, n: usize) -> ScaledDataset {
        let ds = generate_dataset(&ScenarioConfig::n1(), n, seed).unwrap();
        ScaledDataset::from_dataset(&ds).unwrap()
    }

    #[test]
    fn epochs_zero_is_identity() {
        let cfg = TrainConfig { epochs: 0, ..small_cfg() };
        let init = init_weights(cfg.arch, 5).unwrap();
        let out = train_run(&cfg, &data(1, 20), &data(2, 10), init.clone(), 0).unwrap();
        assert!(out.checkpoints.is_empty());
        assert_eq!(out.weights, init);
    }

    #[test]
    fn run_produces_one_checkpoint_per_epoch_and_is_reproducible() {
        let cfg = small_cfg();
        let (tr, va) = (data(1, 40), data(2, 20));
        let init = init_weights(cfg.arch, 5).unwrap();
        let a = train_run(&cfg, &tr, &va, init.clone(), 0).unwrap();
        let b = train_run(&cfg, &tr, &va, init, 0).unwrap();
        assert_eq!(a.checkpoints.len(), 3);
        assert_eq!(a, b);
        assert!(a.weights.is_finite());
        assert!(a.checkpoints.iter().all(|c| c.val_moa.is_finite()));
    }

    #[test]
    fn poisoned_init_restarts() {
        let cfg = small_cfg();
        let mut init = init_weights(cfg.arch, 5).unwrap();
        init.layers[0].weights[0] = 1e300;
        let out = train_run(&cfg, &data(1, 40), &data(2, 20), init, 0).unwrap();
        assert!(!out.restarts.is_empty());
        assert!(out.weights.is_finite());
        assert_eq!(out.checkpoints.len(), 3);
    }

    #[test]
    fn injected_faults_never_leak() {
        let cfg = small_cfg();
        let (tr, va) = (data(1, 40), data(2, 20));
        let init = init_weights(cfg.arch, 5).unwrap();
        for (ep, b) in [(1, 0), (2, 1), (3, 2)] {
            let out = train_run_with_faults(&cfg, &tr, &va, init.clone(), None, 0, &|a, e, bb| a == 0 && e == ep && bb == b)
                .unwrap();
            assert_eq!(out.restarts.len(), 1);
            assert_eq!((out.restarts[0].epoch, out.restarts[0].batch), (ep, Some(b)));
            assert!(out.weights.is_finite());
            assert!(out.checkpoints.iter().all(|c| c.weights.is_finite()));
        }
    }

    #[test]
    fn exhausted_budget_reports_diagnostics() {
        let cfg = TrainConfig {
            max_nan_restarts: 2,
            ..small_cfg()
        };
        let init = init_weights(cfg.arch, 5).unwrap();
        let err = train_run_with_faults(&cfg, &data(1, 40), &data(2, 20), init, None, 0, &|_, e, b| e == 2 && b == 1)
            .unwrap_err();
        match err {
            Error::Training {
                restarts,
                last_finite_loss,
                epoch,
                batch,
                ..
            } => {
                assert_eq!(restarts, 2);
                assert!(last_finite_loss.unwrap().is_finite());
                assert_eq!((epoch, batch), (2, Some(1)));
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn experiment_counts_and_selection() {
        let cfg = small_cfg();
        let r = train_experiment(&cfg, &data(1, 40), &data(2, 20)).unwrap();
        assert_eq!(r.checkpoints.len(), 6);
        assert!(r.checkpoints.iter().all(|c| r.best().val_moa >= c.val_moa));
        assert!(r.best().val_moa >= r.median().val_moa);
        let single = TrainConfig {
            epochs: 1,
            iterations: 1,
            ..small_cfg()
        };
        let r = train_experiment(&single, &data(1, 40), &data(2, 20)).unwrap();
        assert_eq!(r.global_best, r.global_median);
    }

    #[test]
    fn experiment_fits_output_scale_and_restarts_keep_it() {
        let cfg = TrainConfig {
            epochs: 1,
            iterations: 1,
            ..small_cfg()
        };
        let tr = data(1, 40);
        let r = train_experiment(&cfg, &tr, &data(2, 20)).unwrap();
        assert_eq!(r.best().weights.output, OutputScale::fit(tr.samples.iter().map(|s| s.s)));
        let off = TrainConfig {
            standardize_output: false,
            ..cfg.clone()
        };
        let r = train_experiment(&off, &tr, &data(2, 20)).unwrap();
        assert_eq!(r.best().weights.output, OutputScale::default());

        let o = OutputScale { shift: 0.5, scale: 0.2 };
        let init = init_weights(cfg.arch, 5).unwrap().with_output(o);
        let out = train_run_with_faults(&cfg, &tr, &data(2, 20), init, None, 0, &|a, _, _| a == 0).unwrap();
        assert_eq!(out.restarts.len(), 1);
        assert_eq!(out.weights.output, o);
    }

    #[test]
    fn transfer_zero_epochs_keeps_weights() {
        let cfg = TrainConfig { epochs: 0, ..small_cfg() };
        let pre = init_weights(cfg.arch, 9).unwrap();
        let r = transfer_train(&pre, None, &cfg, &data(1, 40), &data(2, 20)).unwrap();
        assert_eq!(r.checkpoints.len(), 1);
        assert_eq!(r.best().weights, pre);
        assert_eq!(r.best().epoch, 0);
    }

    #[test]
    fn resumed_optimizer_continues_step_count() {
        let cfg = TrainConfig {
            epochs: 1,
            iterations: 1,
            ..small_cfg()
        };
        let (tr, va) = (data(1, 40), data(2, 20));
        let first = train_experiment(&cfg, &tr, &va).unwrap();
        let ck = first.best();
        let opt = ck.optimizer.as_ref().unwrap();
        let steps = opt.t;
        assert!(steps > 0);
        let fresh = transfer_train(&ck.weights, None, &cfg, &tr, &va).unwrap();
        let resumed = transfer_train(&ck.weights, Some(opt), &cfg, &tr, &va).unwrap();
        assert_eq!(fresh.best().optimizer.as_ref().unwrap().t, steps);
        assert_eq!(resumed.best().optimizer.as_ref().unwrap().t, 2 * steps);
        assert_ne!(fresh.best().weights, resumed.best().weights);
        let other = AdamState::new(&init_weights(Architecture::new(2, 8, 3), 1).unwrap(), 0.005);
        assert!(matches!(
            transfer_train(&ck.weights, Some(&other), &cfg, &tr, &va),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn transfer_rejects_other_architecture() {
        let cfg = small_cfg();
        let pre = init_weights(Architecture::new(2, 8, 3), 9).unwrap();
        assert!(matches!(
            transfer_train(&pre, None, &cfg, &data(1, 40), &data(2, 20)),
            Err(Error::Config(_))
        ));
    }
}
