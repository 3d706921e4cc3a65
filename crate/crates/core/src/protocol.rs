//! The class-incremental protocol: plan states, regenerate pseudo-features for
//! every past class at each state, retrain, evaluate.
//!
//! Past classes are only ever seen through their stored prototypes. Training
//! rows of a class are read from the bank exactly once, in the state that
//! introduces it.

use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bankio::BankAccess;
use crate::classifier::{accuracy_topk, train, LabeledFeatures, LinearModel, TrainConfig};
use crate::error::{Error, Result};
use crate::generator::{PseudoSet, SourceView};
use crate::matrix::FeatureMatrix;
use crate::optimizer::{optimize_class, ClimbTrace, HillClimbParams, OptimizerVariant};
use crate::seed::{self, phase};
use crate::selection::{select, StrategyKind, StrategySpec};
use crate::stats::PrototypeStore;
use crate::ClassId;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatePlan {
    /// Classes introduced per state; entry 0 is the initial state.
    pub class_counts: Vec<usize>,
    /// Every class id, in introduction order.
    pub class_order: Vec<ClassId>,
}

impl StatePlan {
    pub fn num_states(&self) -> usize {
        self.class_counts.len()
    }

    /// Classes introduced in `state`.
    pub fn state_classes(&self, state: usize) -> &[ClassId] {
        let start: usize = self.class_counts[..state].iter().sum();
        &self.class_order[start..start + self.class_counts[state]]
    }

    /// Classes introduced strictly before `state`.
    pub fn seen_before(&self, state: usize) -> &[ClassId] {
        let end: usize = self.class_counts[..state].iter().sum();
        &self.class_order[..end]
    }
}

/// A large initial state followed by `states` equal incremental states.
/// The class order is a seeded shuffle of `class_ids`.
pub fn plan_states(class_ids: &[ClassId], states: usize, initial: usize, order_seed: u64) -> Result<StatePlan> {
    let total = class_ids.len();
    let bad = || Error::BadSplit { total, states, initial };
    if states == 0 || initial == 0 || initial >= total || !(total - initial).is_multiple_of(states) {
        return Err(bad());
    }
    let step = (total - initial) / states;
    if step > initial {
        return Err(bad());
    }
    let mut order = class_ids.to_vec();
    order.sort_unstable();
    order.dedup();
    if order.len() != total {
        return Err(Error::InvalidParams("duplicate class ids".into()));
    }
    order.shuffle(&mut seed::rng(order_seed));
    let mut class_counts = vec![initial];
    class_counts.extend(std::iter::repeat_n(step, states));
    Ok(StatePlan {
        class_counts,
        class_order: order,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AvgMode {
    /// Mean over states `0..=T`.
    #[default]
    All,
    /// Mean over states `1..=T`.
    Incremental,
}

/// Hill-climbing settings; unset fields take the defaults for the run's `s`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ClimbSettings {
    pub max_iter: Option<usize>,
    pub patience: Option<usize>,
    pub replace_cnt: Option<usize>,
}

impl ClimbSettings {
    pub fn resolve(&self, s: usize, seed_: u64) -> HillClimbParams {
        let d = HillClimbParams::defaults_for(s, seed_);
        HillClimbParams {
            max_iter: self.max_iter.unwrap_or(d.max_iter),
            patience: self.patience.unwrap_or(d.patience),
            replace_cnt: self.replace_cnt.unwrap_or(d.replace_cnt),
            seed: seed_,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Number of incremental states after the initial one.
    pub states: usize,
    /// Classes in the initial state.
    pub initial: usize,
    pub strategy: StrategySpec,
    pub variant: Option<OptimizerVariant>,
    pub hill_climb: ClimbSettings,
    pub train: TrainConfig,
    pub seed: u64,
    pub avg_mode: AvgMode,
    /// Cap real new-class training rows at `s` per class.
    pub truncate_real: bool,
}

impl RunConfig {
    pub fn new(states: usize, initial: usize, strategy: StrategySpec, seed_: u64) -> Self {
        Self {
            states,
            initial,
            strategy,
            variant: None,
            hill_climb: ClimbSettings::default(),
            train: TrainConfig::default(),
            seed: seed_,
            avg_mode: AvgMode::All,
            truncate_real: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.strategy.validate()?;
        self.train.validate()?;
        let p = self.hill_climb.resolve(self.strategy.s, 0);
        if p.max_iter < 1 || p.patience < 1 || p.replace_cnt < 1 {
            return Err(Error::InvalidParams(
                "max_iter, patience and replace_cnt must be at least 1".into(),
            ));
        }
        Ok(())
    }

    pub fn method_label(&self) -> String {
        match self.variant {
            Some(v) => v.name().to_owned(),
            None => self.strategy.label(),
        }
    }

    pub fn seeds(&self) -> SeedEcho {
        SeedEcho {
            master: self.seed,
            order: seed::derive(self.seed, &[phase::ORDER]),
            selection: seed::derive(self.seed, &[phase::SELECTION]),
            optimizer: seed::derive(self.seed, &[phase::OPTIMIZER]),
            classifier: seed::derive(self.seed, &[phase::CLASSIFIER]),
        }
    }
}

/// Phase seeds. Per-class seeds are `derive(phase_seed, [state, class_id])`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedEcho {
    pub master: u64,
    pub order: u64,
    pub selection: u64,
    pub optimizer: u64,
    pub classifier: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateMetrics {
    pub state: usize,
    pub seen_classes: usize,
    pub new_classes: Vec<ClassId>,
    pub top1: f64,
    pub top5: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Averages {
    pub avg_top1: f64,
    pub avg_top5: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub generation_secs: f64,
    pub training_secs: f64,
    pub evaluation_secs: f64,
    pub total_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub tool: String,
    pub version: String,
    pub method: String,
    pub config: RunConfig,
    pub plan: StatePlan,
    pub seeds: SeedEcho,
    pub per_state: Vec<StateMetrics>,
    pub averages: Averages,
    pub timings: Timings,
}

impl RunReport {
    /// Mean of the per-state accuracies selected by `mode`.
    pub fn average(per_state: &[StateMetrics], mode: AvgMode) -> Averages {
        let skip = match mode {
            AvgMode::All => 0,
            AvgMode::Incremental => 1,
        };
        let sel = &per_state[skip.min(per_state.len())..];
        let n = sel.len().max(1) as f64;
        Averages {
            avg_top1: sel.iter().map(|m| m.top1).sum::<f64>() / n,
            avg_top5: sel.iter().map(|m| m.top5).sum::<f64>() / n,
        }
    }
}

/// Everything a run produces besides the report.
#[derive(Debug, Clone, Default)]
pub struct RunArtifacts {
    /// `(state, trace)` for every optimized past class.
    pub traces: Vec<(usize, ClimbTrace)>,
    /// The classifier of the last state.
    pub final_model: Option<LinearModel>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum PastSource {
    Pseudo,
    Real,
}

fn pseudo_for_class(
    config: &RunConfig,
    seeds: &SeedEcho,
    state: usize,
    past: &crate::stats::ClassPrototype,
    sources: &[SourceView<'_>],
) -> Result<(PseudoSet, Option<ClimbTrace>)> {
    let s = config.strategy.s;
    let labels = [state as u64, past.class_id as u64];
    match config.variant {
        None => Ok((
            select(&config.strategy, past, sources, seed::derive(seeds.selection, &labels))?,
            None,
        )),
        Some(variant) => {
            let initial = match variant.pooled_sources() {
                Some(_) => None,
                None => Some(select(
                    &config.strategy,
                    past,
                    sources,
                    seed::derive(seeds.selection, &labels),
                )?),
            };
            let params = config.hill_climb.resolve(s, seed::derive(seeds.optimizer, &labels));
            let (set, trace) = optimize_class(variant, past, initial, sources, s, &params)?;
            Ok((set, Some(trace)))
        }
    }
}

fn run_protocol<B: BankAccess + Sync + ?Sized>(
    bank: &B,
    config: &RunConfig,
    past_source: PastSource,
) -> Result<(RunReport, RunArtifacts)> {
    config.validate()?;
    let started = Instant::now();
    let seeds = config.seeds();
    let plan = plan_states(&bank.class_ids(), config.states, config.initial, seeds.order)?;
    let s = config.strategy.s;
    let dim = bank.dim();

    let mut store = PrototypeStore::new();
    let mut per_state = Vec::with_capacity(plan.num_states());
    let mut timings = Timings::default();
    let mut artifacts = RunArtifacts::default();

    for state in 0..plan.num_states() {
        let new_ids = plan.state_classes(state);
        let past_ids = plan.seen_before(state);

        let t0 = Instant::now();
        let new_train: Vec<(ClassId, &FeatureMatrix)> = new_ids
            .iter()
            .map(|&c| Ok((c, bank.train(c)?)))
            .collect::<Result<_>>()?;
        for (c, f) in &new_train {
            store.admit(*c, f)?;
        }
        let sources: Vec<SourceView> = new_train
            .iter()
            .map(|(c, f)| {
                Ok(SourceView {
                    class_id: *c,
                    features: f,
                    centroid: &store.get(*c)?.centroid,
                })
            })
            .collect::<Result<_>>()?;

        let past_sets: Vec<(ClassId, FeatureMatrix)> = match past_source {
            PastSource::Pseudo => {
                let generated: Vec<(PseudoSet, Option<ClimbTrace>)> = past_ids
                    .par_iter()
                    .map(|&c| pseudo_for_class(config, &seeds, state, store.get(c)?, &sources))
                    .collect::<Result<_>>()?;
                generated
                    .into_iter()
                    .map(|(set, trace)| {
                        if let Some(t) = trace {
                            artifacts.traces.push((state, t));
                        }
                        (set.class_id, set.features)
                    })
                    .collect()
            }
            PastSource::Real => past_ids
                .iter()
                .map(|&c| Ok((c, bank.train(c)?.head(s))))
                .collect::<Result<_>>()?,
        };
        timings.generation_secs += t0.elapsed().as_secs_f64();

        let t1 = Instant::now();
        let mut train_set = LabeledFeatures::new(dim);
        for (c, f) in &past_sets {
            train_set.push_class(*c, f)?;
        }
        for (c, f) in &new_train {
            if config.truncate_real {
                train_set.push_class(*c, &f.head(s))?;
            } else {
                train_set.push_class(*c, f)?;
            }
        }
        let model = train(
            &train_set,
            &config.train,
            seed::derive(seeds.classifier, &[state as u64]),
        )?;
        timings.training_secs += t1.elapsed().as_secs_f64();

        let t2 = Instant::now();
        let mut test_set = LabeledFeatures::new(dim);
        for &c in past_ids.iter().chain(new_ids) {
            test_set.push_class(c, bank.test(c)?)?;
        }
        let seen = past_ids.len() + new_ids.len();
        let top1 = accuracy_topk(&model, &test_set, 1)?;
        let top5 = accuracy_topk(&model, &test_set, 5.min(seen))?;
        timings.evaluation_secs += t2.elapsed().as_secs_f64();

        per_state.push(StateMetrics {
            state,
            seen_classes: seen,
            new_classes: new_ids.to_vec(),
            top1,
            top5,
        });
        artifacts.final_model = Some(model);
    }
    timings.total_secs = started.elapsed().as_secs_f64();

    let averages = RunReport::average(&per_state, config.avg_mode);
    let method = match past_source {
        PastSource::Pseudo => config.method_label(),
        PastSource::Real => "upper".to_owned(),
    };
    Ok((
        RunReport {
            tool: env!("CARGO_PKG_NAME").to_owned(),
            version: env!("CARGO_PKG_VERSION").to_owned(),
            method,
            config: config.clone(),
            plan,
            seeds,
            per_state,
            averages,
            timings,
        },
        artifacts,
    ))
}

/// Runs the incremental protocol with pseudo-features for past classes.
pub fn run_incremental<B: BankAccess + Sync + ?Sized>(bank: &B, config: &RunConfig) -> Result<RunReport> {
    Ok(run_protocol(bank, config, PastSource::Pseudo)?.0)
}

pub fn run_incremental_with_artifacts<B: BankAccess + Sync + ?Sized>(
    bank: &B,
    config: &RunConfig,
) -> Result<(RunReport, RunArtifacts)> {
    run_protocol(bank, config, PastSource::Pseudo)
}

/// The same protocol with past classes represented by their real training
/// rows: the ceiling for any pseudo-feature method.
pub fn run_upper_bound<B: BankAccess + Sync + ?Sized>(bank: &B, config: &RunConfig) -> Result<RunReport> {
    Ok(run_protocol(bank, config, PastSource::Real)?.0)
}

pub fn run_upper_bound_with_artifacts<B: BankAccess + Sync + ?Sized>(
    bank: &B,
    config: &RunConfig,
) -> Result<(RunReport, RunArtifacts)> {
    run_protocol(bank, config, PastSource::Real)
}

/// A named method for comparison tables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Method {
    Strategy { kind: StrategyKind, k: Option<usize> },
    Variant(OptimizerVariant),
    Upper,
}

impl std::str::FromStr for Method {
    type Err = Error;

    /// `kth`, `kth<N>`, `rand`, `herd`, `m2`, `m3`, a variant name, or `upper`.
    fn from_str(s: &str) -> Result<Self> {
        if s == "upper" {
            return Ok(Self::Upper);
        }
        if let Ok(v) = s.parse::<OptimizerVariant>() {
            return Ok(Self::Variant(v));
        }
        if let Some(k) = s.strip_prefix("kth").filter(|k| !k.is_empty()) {
            let k = k
                .parse()
                .map_err(|_| Error::InvalidParams(format!("bad method {s:?}")))?;
            return Ok(Self::Strategy {
                kind: StrategyKind::Kth,
                k: Some(k),
            });
        }
        Ok(Self::Strategy {
            kind: s.parse()?,
            k: None,
        })
    }
}

impl Method {
    /// The base configuration with this method applied. Optimizer variants
    /// start from the base strategy (the pooled ones ignore it).
    pub fn apply(&self, base: &RunConfig) -> RunConfig {
        let mut cfg = base.clone();
        match self {
            Self::Strategy { kind, k } => {
                cfg.strategy.kind = *kind;
                if let Some(k) = k {
                    cfg.strategy.k = *k;
                }
                cfg.variant = None;
            }
            Self::Variant(v) => cfg.variant = Some(*v),
            Self::Upper => cfg.variant = None,
        }
        cfg
    }

    pub fn run<B: BankAccess + Sync + ?Sized>(&self, bank: &B, base: &RunConfig) -> Result<RunReport> {
        let cfg = self.apply(base);
        match self {
            Self::Upper => run_upper_bound(bank, &cfg),
            _ => run_incremental(bank, &cfg),
        }
    }
}

/// `(T, avg_top1, avg_top5)` for one incremental setting.
pub type SettingScore = (usize, f64, f64);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub method: String,
    /// `(T, avg_top1, avg_top5)` per incremental setting.
    pub per_setting: Vec<SettingScore>,
    /// Mean over settings of `avg - baseline avg`, in percentage points.
    pub change_top1: f64,
    pub change_top5: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub baseline: String,
    pub settings: Vec<usize>,
    pub rows: Vec<ComparisonRow>,
    pub reports: Vec<RunReport>,
}

/// Runs every method under every `T` in `settings` with the same seed and
/// class order, then tabulates accuracy changes against `baseline`.
pub fn compare_strategies<B: BankAccess + Sync + ?Sized>(
    bank: &B,
    base: &RunConfig,
    methods: &[(String, Method)],
    baseline: &str,
    settings: &[usize],
) -> Result<Comparison> {
    if !methods.iter().any(|(n, _)| n == baseline) {
        return Err(Error::InvalidParams(format!(
            "baseline {baseline:?} is not among the compared methods"
        )));
    }
    if settings.is_empty() {
        return Err(Error::InvalidParams("no incremental settings given".into()));
    }
    let mut reports = Vec::new();
    let mut table: Vec<(String, Vec<SettingScore>)> = Vec::new();
    for (name, method) in methods {
        let mut row = Vec::new();
        for &t in settings {
            let cfg = RunConfig {
                states: t,
                ..base.clone()
            };
            let report = method.run(bank, &cfg)?;
            row.push((t, report.averages.avg_top1, report.averages.avg_top5));
            reports.push(report);
        }
        table.push((name.clone(), row));
    }
    let base_row = table
        .iter()
        .find(|(n, _)| n == baseline)
        .map(|(_, r)| r.clone())
        .expect("baseline checked above");
    let rows = table
        .into_iter()
        .map(|(method, per_setting)| {
            let n = per_setting.len() as f64;
            let (d1, d5) = per_setting.iter().zip(&base_row).fold((0.0, 0.0), |(a, b), (m, r)| {
                (a + 100.0 * (m.1 - r.1), b + 100.0 * (m.2 - r.2))
            });
            ComparisonRow {
                method,
                per_setting,
                change_top1: d1 / n,
                change_top5: d5 / n,
            }
        })
        .collect();
    Ok(Comparison {
        baseline: baseline.to_owned(),
        settings: settings.to_vec(),
        rows,
        reports,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bankio::{synth_generate, SyntheticSpec};

    #[test]
    fn plan_examples() {
        let ids: Vec<ClassId> = (0..100).collect();
        assert_eq!(
            plan_states(&ids, 5, 50, 1).unwrap().class_counts,
            vec![50, 10, 10, 10, 10, 10]
        );
        let p = plan_states(&ids, 20, 40, 1).unwrap();
        assert_eq!(p.class_counts[0], 40);
        assert_eq!(&p.class_counts[1..], &[3; 20]);
        let ten: Vec<ClassId> = (0..10).collect();
        assert_eq!(plan_states(&ten, 1, 5, 0).unwrap().class_counts, vec![5, 5]);
        assert!(matches!(plan_states(&ids, 7, 50, 1), Err(Error::BadSplit { .. })));
        assert!(matches!(plan_states(&ten, 1, 2, 1), Err(Error::BadSplit { .. })));
        assert!(matches!(plan_states(&ten, 0, 5, 1), Err(Error::BadSplit { .. })));
    }

    #[test]
    fn plan_is_a_seeded_permutation() {
        let ids: Vec<ClassId> = (0..30).collect();
        let a = plan_states(&ids, 3, 15, 9).unwrap();
        assert_eq!(a, plan_states(&ids, 3, 15, 9).unwrap());
        let mut sorted = a.class_order.clone();
        sorted.sort();
        assert_eq!(sorted, ids);
        assert_eq!(a.state_classes(1), &a.class_order[15..20]);
        assert_eq!(a.seen_before(2).len(), 20);
    }

    fn small_bank(seed_: u64) -> crate::bankio::FeatureBank {
        bank_with(6, seed_)
    }

    fn bank_with(num_classes: usize, seed_: u64) -> crate::bankio::FeatureBank {
        synth_generate(&SyntheticSpec {
            num_classes,
            dim: 8,
            train_per_class: 30,
            test_per_class: 10,
            centroid_scale: 10.0,
            noise_sigma: 1.0,
            anisotropy: None,
            class_variance_spread: 0.5,
            seed: seed_,
        })
        .unwrap()
    }

    #[test]
    fn averages_follow_mode() {
        let bank = small_bank(1);
        let mut cfg = RunConfig::new(2, 2, StrategySpec::new(StrategyKind::Kth, 10), 3);
        let r = run_incremental(&bank, &cfg).unwrap();
        assert_eq!(r.per_state.len(), 3);
        let mean: f64 = r.per_state.iter().map(|m| m.top1).sum::<f64>() / 3.0;
        assert_eq!(r.averages.avg_top1, mean);
        cfg.avg_mode = AvgMode::Incremental;
        let r = run_incremental(&bank, &cfg).unwrap();
        assert_eq!(r.averages.avg_top1, (r.per_state[1].top1 + r.per_state[2].top1) / 2.0);
        assert_eq!(
            r.per_state.iter().map(|m| m.seen_classes).collect::<Vec<_>>(),
            vec![2, 4, 6]
        );
    }

    #[test]
    fn every_variant_runs() {
        let bank = bank_with(9, 2);
        for v in OptimizerVariant::ALL {
            let mut cfg = RunConfig::new(2, 3, StrategySpec::new(StrategyKind::Kth, 10), 4);
            cfg.variant = Some(v);
            let (r, art) = run_incremental_with_artifacts(&bank, &cfg).unwrap();
            assert_eq!(r.method, v.name());
            // three past classes at state 1, six at state 2
            assert_eq!(art.traces.len(), 9, "{v}");
        }
    }

    #[test]
    fn upper_bound_shares_state_zero() {
        let bank = small_bank(3);
        let cfg = RunConfig::new(2, 2, StrategySpec::new(StrategyKind::Kth, 10), 5);
        let a = run_incremental(&bank, &cfg).unwrap();
        let b = run_upper_bound(&bank, &cfg).unwrap();
        assert_eq!(a.per_state[0], b.per_state[0]);
        assert_eq!(b.method, "upper");
    }

    #[test]
    fn method_parsing() {
        assert_eq!(
            "kth".parse::<Method>().unwrap(),
            Method::Strategy {
                kind: StrategyKind::Kth,
                k: None
            }
        );
        assert_eq!(
            "kth3".parse::<Method>().unwrap(),
            Method::Strategy {
                kind: StrategyKind::Kth,
                k: Some(3)
            }
        );
        assert_eq!(
            "M3opt".parse::<Method>().unwrap(),
            Method::Variant(OptimizerVariant::M3OptWide)
        );
        assert_eq!("upper".parse::<Method>().unwrap(), Method::Upper);
        assert!("kthx".parse::<Method>().is_err());
        assert!("bogus".parse::<Method>().is_err());
    }

    #[test]
    fn comparison_baseline_is_zero() {
        let bank = bank_with(10, 4);
        let cfg = RunConfig::new(2, 4, StrategySpec::new(StrategyKind::Kth, 10), 6);
        let methods: Vec<(String, Method)> = ["kth", "herd", "shift"]
            .iter()
            .map(|m| (m.to_string(), m.parse().unwrap()))
            .collect();
        let cmp = compare_strategies(&bank, &cfg, &methods, "kth", &[2, 3]).unwrap();
        let base = &cmp.rows[0];
        assert_eq!((base.change_top1, base.change_top5), (0.0, 0.0));
        for row in &cmp.rows {
            let expected: f64 = row
                .per_setting
                .iter()
                .zip(&base.per_setting)
                .map(|(m, b)| 100.0 * (m.1 - b.1))
                .sum::<f64>()
                / 2.0;
            assert!((row.change_top1 - expected).abs() < 0.01);
        }
        assert!(compare_strategies(&bank, &cfg, &methods, "rand", &[1]).is_err());
    }
}
