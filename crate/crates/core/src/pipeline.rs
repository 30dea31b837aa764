//! Experiment orchestration: stratified split, train-only preprocessing,
//! leave-one-out grid search and the six-arm comparison of real-trained and
//! GAN-trained classifiers on a shared held-out test set.

use std::fmt::Write as _;

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cgan::{self, GanConfig};
use crate::classifiers::{
    fit_forest, fit_lr, fit_svm, ForestConfig, Kernel, LogisticConfig, ModelFamily, SvmConfig,
    TrainedClassifier,
};
use crate::error::{Error, Result};
use crate::evalkit::{confusion, report, ClassificationReport, ConfusionMatrix};
use crate::numkit::{MeanImputer, Rng, StandardScaler};
use crate::table::LabeledTable;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitSpec {
    pub test_fraction: f64,
    pub stratified: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            test_fraction: 0.2,
            stratified: true,
        }
    }
}

/// Row indices of a split, each list in ascending order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

fn round_half_up(x: f64) -> usize {
    (x + 0.5 + 1e-9).floor() as usize
}

/// Per-class test counts: `round(count * fraction)` per class, then the
/// largest-remainder rule adjusts them until they add up to
/// `round(n * fraction)`.
fn stratified_counts(counts: [usize; 2], fraction: f64) -> [usize; 2] {
    let total = round_half_up((counts[0] + counts[1]) as f64 * fraction);
    let exact = counts.map(|c| c as f64 * fraction);
    let mut k = exact.map(round_half_up);
    while k[0] + k[1] != total {
        let grow = k[0] + k[1] < total;
        // the class whose rounding moved it furthest from its exact share,
        // class 0 first on ties
        let pick = (0..2)
            .filter(|&c| if grow { k[c] < counts[c] } else { k[c] > 0 })
            .max_by(|&a, &b| {
                let gap = |c: usize| {
                    if grow {
                        exact[c] - k[c] as f64
                    } else {
                        k[c] as f64 - exact[c]
                    }
                };
                gap(a).total_cmp(&gap(b)).then(b.cmp(&a))
            });
        match pick {
            Some(c) if grow => k[c] += 1,
            Some(c) => k[c] -= 1,
            None => break,
        }
    }
    k
}

pub fn split_indices(labels: &[u8], spec: &SplitSpec, rng: &mut Rng) -> Result<SplitIndices> {
    if !(spec.test_fraction > 0.0 && spec.test_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "test fraction must lie in (0, 1), got {}",
            spec.test_fraction
        )));
    }
    let mut test = Vec::new();
    if spec.stratified {
        let by_class: [Vec<usize>; 2] =
            [0u8, 1].map(|c| (0..labels.len()).filter(|&i| labels[i] == c).collect());
        if let Some(c) = (0..2).find(|&c| by_class[c].is_empty()) {
            return Err(Error::Infeasible(format!(
                "class {c} has no rows to stratify"
            )));
        }
        let k = stratified_counts([by_class[0].len(), by_class[1].len()], spec.test_fraction);
        for c in 0..2 {
            test.extend(
                rng.sample_indices(by_class[c].len(), k[c])
                    .into_iter()
                    .map(|i| by_class[c][i]),
            );
        }
    } else {
        let k = round_half_up(labels.len() as f64 * spec.test_fraction);
        test = rng.sample_indices(labels.len(), k);
    }
    if test.is_empty() || test.len() == labels.len() {
        return Err(Error::Infeasible(format!(
            "a {} test fraction of {} rows leaves an empty side",
            spec.test_fraction,
            labels.len()
        )));
    }
    test.sort_unstable();
    let mut is_test = vec![false; labels.len()];
    test.iter().for_each(|&i| is_test[i] = true);
    let train = (0..labels.len()).filter(|&i| !is_test[i]).collect();
    Ok(SplitIndices { train, test })
}

/// Splits with the `split` stream of `seed`. Rows keep their input order
/// within each side.
pub fn stratified_split(
    table: &LabeledTable,
    spec: &SplitSpec,
    seed: u64,
) -> Result<(LabeledTable, LabeledTable)> {
    let idx = split_indices(table.labels(), spec, &mut Rng::new(seed).derive("split"))?;
    Ok((table.select(&idx.train), table.select(&idx.test)))
}

/// Mean imputation followed by standardization, both fit on training rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Preprocessor {
    pub imputer: MeanImputer,
    pub scaler: StandardScaler,
}

impl Preprocessor {
    pub fn fit(rows: &[Vec<Option<f64>>]) -> Result<Self> {
        let imputer = MeanImputer::fit(rows)?;
        let scaler = StandardScaler::fit(imputer.transform(rows)?.view())?;
        Ok(Self { imputer, scaler })
    }

    pub fn transform(&self, rows: &[Vec<Option<f64>>]) -> Result<Array2<f64>> {
        self.scaler.transform(self.imputer.transform(rows)?.view())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Hyperparams {
    Logistic {
        lambda: f64,
    },
    Svm {
        kernel: Kernel,
        c: f64,
    },
    Forest {
        n_trees: usize,
        max_depth: Option<usize>,
    },
}

impl Hyperparams {
    pub fn family(&self) -> ModelFamily {
        match self {
            Hyperparams::Logistic { .. } => ModelFamily::Logistic,
            Hyperparams::Svm { .. } => ModelFamily::Svm,
            Hyperparams::Forest { .. } => ModelFamily::Forest,
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Hyperparams::Logistic { lambda } => format!("lambda={lambda}"),
            Hyperparams::Svm {
                kernel: Kernel::Linear,
                c,
            } => format!("kernel=linear C={c}"),
            Hyperparams::Svm {
                kernel: Kernel::Rbf { gamma },
                c,
            } => format!("kernel=rbf C={c} gamma={gamma}"),
            Hyperparams::Forest { n_trees, max_depth } => match max_depth {
                Some(d) => format!("trees={n_trees} depth={d}"),
                None => format!("trees={n_trees} depth=unbounded"),
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelChoice {
    Linear,
    Rbf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    pub lr_lambda: Vec<f64>,
    pub svm_kernel: Vec<KernelChoice>,
    pub svm_c: Vec<f64>,
    /// Only crossed with RBF kernels.
    pub svm_gamma: Vec<f64>,
    pub rf_trees: Vec<usize>,
    /// `None` is unbounded depth.
    pub rf_depth: Vec<Option<usize>>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            lr_lambda: vec![0.01, 0.1, 1.0, 10.0],
            svm_kernel: vec![KernelChoice::Linear, KernelChoice::Rbf],
            svm_c: vec![0.1, 1.0, 10.0],
            svm_gamma: vec![0.1, 1.0],
            rf_trees: vec![50, 100],
            rf_depth: vec![None, Some(5)],
        }
    }
}

impl GridSpec {
    /// Canonical cell order: LR by lambda; SVM kernel-major, then C, then
    /// gamma (linear cells ignore gamma); RF trees-major, then depth. Each
    /// list is walked in the order given.
    pub fn cells(&self, family: ModelFamily) -> Vec<Hyperparams> {
        match family {
            ModelFamily::Logistic => self
                .lr_lambda
                .iter()
                .map(|&lambda| Hyperparams::Logistic { lambda })
                .collect(),
            ModelFamily::Svm => {
                let mut cells = Vec::new();
                for kernel in &self.svm_kernel {
                    for &c in &self.svm_c {
                        match kernel {
                            KernelChoice::Linear => cells.push(Hyperparams::Svm {
                                kernel: Kernel::Linear,
                                c,
                            }),
                            KernelChoice::Rbf => {
                                cells.extend(self.svm_gamma.iter().map(|&gamma| Hyperparams::Svm {
                                    kernel: Kernel::Rbf { gamma },
                                    c,
                                }))
                            }
                        }
                    }
                }
                cells
            }
            ModelFamily::Forest => self
                .rf_trees
                .iter()
                .flat_map(|&n_trees| {
                    self.rf_depth
                        .iter()
                        .map(move |&max_depth| Hyperparams::Forest { n_trees, max_depth })
                })
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for family in ModelFamily::ALL {
            if self.cells(family).is_empty() {
                return Err(Error::InvalidParameter(format!(
                    "empty {} grid",
                    family.short_name()
                )));
            }
        }
        Ok(())
    }
}

/// Fits one model, or the constant fallback when `y` holds a single class.
/// `seed` only matters for forests.
pub fn fit_model(
    x: ArrayView2<f64>,
    y: &[u8],
    hp: &Hyperparams,
    seed: u64,
) -> Result<TrainedClassifier> {
    if let Some(&first) = y.first() {
        if y.iter().all(|&l| l == first) {
            return Ok(TrainedClassifier::Constant {
                label: first,
                width: x.ncols(),
            });
        }
    }
    Ok(match hp {
        Hyperparams::Logistic { lambda } => TrainedClassifier::Logistic(fit_lr(
            x,
            y,
            &LogisticConfig {
                lambda: *lambda,
                ..Default::default()
            },
        )?),
        Hyperparams::Svm { kernel, c } => TrainedClassifier::Svm(fit_svm(
            x,
            y,
            &SvmConfig {
                kernel: *kernel,
                c: *c,
                ..Default::default()
            },
        )?),
        Hyperparams::Forest { n_trees, max_depth } => TrainedClassifier::Forest(fit_forest(
            x,
            y,
            &ForestConfig {
                n_trees: *n_trees,
                max_depth: *max_depth,
                seed,
                ..Default::default()
            },
        )?),
    })
}

fn forest_seed(seed: u64, name: &str, index: u64) -> u64 {
    Rng::new(seed)
        .derive("rf")
        .derive_indexed(name, index)
        .seed()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LooResult {
    /// Metrics over the pooled held-out predictions, in row order.
    pub validation: ClassificationReport,
    /// Metrics over the summed per-fold training confusion matrices, which
    /// equal those of the mean training matrix.
    pub train: ClassificationReport,
    pub predictions: Vec<u8>,
    /// Folds whose training rows held a single class.
    pub fallback_folds: usize,
}

/// Leave-one-out cross-validation. Imputation and scaling are re-fit on the
/// n - 1 training rows of every fold.
pub fn loo_cv(train: &LabeledTable, hp: &Hyperparams, seed: u64) -> Result<LooResult> {
    let n = train.len();
    if n < 2 {
        return Err(Error::EmptyInput("leave-one-out needs at least 2 rows"));
    }
    let folds: Vec<(u8, ConfusionMatrix, bool)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let rows: Vec<usize> = (0..n).filter(|&r| r != i).collect();
            let fold = train.select(&rows);
            let pre = Preprocessor::fit(fold.rows())?;
            let x = pre.transform(fold.rows())?;
            let model = fit_model(
                x.view(),
                fold.labels(),
                hp,
                forest_seed(seed, "fold", i as u64),
            )?;
            let held_out = pre.transform(&train.rows()[i..=i])?;
            let pred = model.predict(held_out.view())?[0];
            let fit_pred = model.predict(x.view())?;
            Ok((
                pred,
                confusion(fold.labels(), &fit_pred)?,
                model.is_fallback(),
            ))
        })
        .collect::<Result<_>>()?;
    let predictions: Vec<u8> = folds.iter().map(|f| f.0).collect();
    let train_cm = folds
        .iter()
        .skip(1)
        .fold(folds[0].1, |acc, f| acc.merge(&f.1));
    Ok(LooResult {
        validation: report(&confusion(train.labels(), &predictions)?)?,
        train: report(&train_cm)?,
        predictions,
        fallback_folds: folds.iter().filter(|f| f.2).count(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellScore {
    pub hyperparams: Hyperparams,
    pub validation: ClassificationReport,
    pub train: ClassificationReport,
    pub fallback_folds: usize,
}

impl CellScore {
    /// The selection metric: pooled LOO F1 of label 1.
    pub fn score(&self) -> f64 {
        self.validation.label1.f1
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub best: usize,
    pub cells: Vec<CellScore>,
}

impl GridResult {
    pub fn best_cell(&self) -> &CellScore {
        &self.cells[self.best]
    }
}

/// Scores every cell with [`loo_cv`]; the highest label-1 F1 wins, ties
/// going to the earliest cell.
pub fn grid_search(train: &LabeledTable, cells: &[Hyperparams], seed: u64) -> Result<GridResult> {
    if cells.is_empty() {
        return Err(Error::InvalidParameter("empty grid".into()));
    }
    let scored: Vec<CellScore> = cells
        .par_iter()
        .map(|hp| {
            let loo = loo_cv(train, hp, seed)?;
            Ok(CellScore {
                hyperparams: hp.clone(),
                validation: loo.validation,
                train: loo.train,
                fallback_folds: loo.fallback_folds,
            })
        })
        .collect::<Result<_>>()?;
    let mut best = 0;
    for (i, cell) in scored.iter().enumerate() {
        if cell.score() > scored[best].score() {
            best = i;
        }
    }
    Ok(GridResult {
        best,
        cells: scored,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainingSource {
    Real,
    Gan,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureWeight {
    pub feature: String,
    pub value: f64,
}

/// One (family, training source) arm. Everything but `name` and
/// `test_confusion` may be absent in hand-written files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmResult {
    /// `LR`, `SVM`, `RF`, suffixed `_G` for GAN-trained arms.
    pub name: String,
    #[serde(default)]
    pub family: Option<ModelFamily>,
    #[serde(default)]
    pub source: Option<TrainingSource>,
    #[serde(default)]
    pub hyperparams: Option<Hyperparams>,
    #[serde(default)]
    pub grid: Vec<CellScore>,
    #[serde(default)]
    pub validation: Option<ClassificationReport>,
    /// Final model scored on its own training rows.
    #[serde(default)]
    pub train: Option<ClassificationReport>,
    pub test_confusion: ConfusionMatrix,
    #[serde(default)]
    pub test: Option<ClassificationReport>,
    #[serde(default)]
    pub test_predictions: Vec<u8>,
    /// FNV-1a digest of the raw test table this arm was scored on.
    #[serde(default)]
    pub test_digest: Option<String>,
    /// LR coefficients, linear-SVM primal weights or RF importances.
    #[serde(default)]
    pub feature_summary: Vec<FeatureWeight>,
    #[serde(default)]
    pub fallback: bool,
}

impl ArmResult {
    /// The stored test report, or one recomputed from the confusion matrix.
    pub fn test_report(&self) -> Result<ClassificationReport> {
        match &self.test {
            Some(r) => Ok(r.clone()),
            None => report(&self.test_confusion),
        }
    }
}

/// Whether a GAN-trained arm caught at least as many positives as its
/// real-data counterpart, and at what cost in false positives.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatternCheck {
    pub family: ModelFamily,
    pub real_tp: u64,
    pub gan_tp: u64,
    pub real_fp: u64,
    pub gan_fp: u64,
    pub gan_detects_at_least_as_many: bool,
    pub gan_costs_more_false_positives: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSummary {
    pub train_counts: [usize; 2],
    pub test_counts: [usize; 2],
    pub test_indices: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub split: Option<SplitSummary>,
    #[serde(default)]
    pub gan_counts: Option<[usize; 2]>,
    pub arms: Vec<ArmResult>,
    #[serde(default)]
    pub patterns: Vec<PatternCheck>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub split: SplitSpec,
    pub grid: GridSpec,
}

fn table_digest(table: &LabeledTable) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in table.to_csv_string().bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    format!("{h:016x}")
}

fn run_arm(
    family: ModelFamily,
    source: TrainingSource,
    train: &LabeledTable,
    test: &LabeledTable,
    grid: &GridSpec,
    seed: u64,
) -> Result<ArmResult> {
    let search = grid_search(train, &grid.cells(family), seed)?;
    let best = search.best_cell().clone();
    let pre = Preprocessor::fit(train.rows())?;
    let x = pre.transform(train.rows())?;
    let model = fit_model(
        x.view(),
        train.labels(),
        &best.hyperparams,
        forest_seed(seed, "final", 0),
    )?;
    let train_report = report(&confusion(train.labels(), &model.predict(x.view())?)?)?;
    let x_test = pre.transform(test.rows())?;
    let predictions = model.predict(x_test.view())?;
    let cm = confusion(test.labels(), &predictions)?;
    let suffix = if source == TrainingSource::Gan {
        "_G"
    } else {
        ""
    };
    let feature_summary = model
        .feature_summary()
        .map(|values| {
            train
                .feature_names()
                .iter()
                .zip(values)
                .map(|(f, value)| FeatureWeight {
                    feature: f.clone(),
                    value,
                })
                .collect()
        })
        .unwrap_or_default();
    Ok(ArmResult {
        name: format!("{}{suffix}", family.short_name()),
        family: Some(family),
        source: Some(source),
        hyperparams: Some(best.hyperparams.clone()),
        validation: Some(best.validation.clone()),
        grid: search.cells,
        train: Some(train_report),
        test: Some(report(&cm)?),
        test_confusion: cm,
        test_predictions: predictions,
        test_digest: Some(table_digest(test)),
        feature_summary,
        fallback: model.is_fallback(),
    })
}

fn pattern_checks(arms: &[ArmResult]) -> Vec<PatternCheck> {
    ModelFamily::ALL
        .iter()
        .filter_map(|&family| {
            let find = |source| {
                arms.iter()
                    .find(|a| a.family == Some(family) && a.source == Some(source))
            };
            let (real, gan) = (find(TrainingSource::Real)?, find(TrainingSource::Gan)?);
            let (r, g) = (real.test_confusion, gan.test_confusion);
            Some(PatternCheck {
                family,
                real_tp: r.tp,
                gan_tp: g.tp,
                real_fp: r.fp,
                gan_fp: g.fp,
                gan_detects_at_least_as_many: g.tp >= r.tp,
                gan_costs_more_false_positives: g.fp > r.fp,
            })
        })
        .collect()
}

/// Splits `real` once, then trains every family on the real training rows
/// and on `gan_table`, scoring all six arms on the same real test rows.
pub fn run_experiment(
    real: &LabeledTable,
    gan_table: &LabeledTable,
    config: &ExperimentConfig,
    seed: u64,
) -> Result<ExperimentResult> {
    config.grid.validate()?;
    if gan_table.is_empty() {
        return Err(Error::EmptyInput("GAN training table"));
    }
    if gan_table.feature_names() != real.feature_names() {
        return Err(Error::Schema(
            "GAN table columns differ from the real table".into(),
        ));
    }
    let idx = split_indices(
        real.labels(),
        &config.split,
        &mut Rng::new(seed).derive("split"),
    )?;
    let train = real.select(&idx.train);
    let test = real.select(&idx.test);
    run_on_split(&train, &test, gan_table, config, seed, idx.test)
}

fn run_on_split(
    train: &LabeledTable,
    test: &LabeledTable,
    gan_table: &LabeledTable,
    config: &ExperimentConfig,
    seed: u64,
    test_indices: Vec<usize>,
) -> Result<ExperimentResult> {
    let mut arms = Vec::with_capacity(6);
    for (source, table) in [
        (TrainingSource::Real, train),
        (TrainingSource::Gan, gan_table),
    ] {
        for family in ModelFamily::ALL {
            arms.push(run_arm(family, source, table, test, &config.grid, seed)?);
        }
    }
    Ok(ExperimentResult {
        seed,
        split: Some(SplitSummary {
            train_counts: train.class_counts(),
            test_counts: test.class_counts(),
            test_indices,
        }),
        gan_counts: Some(gan_table.class_counts()),
        patterns: pattern_checks(&arms),
        arms,
    })
}

/// Everything produced by [`run_pipeline`].
#[derive(Clone, Debug, PartialEq)]
pub struct PipelineOutput {
    pub gan: cgan::GanModel,
    pub gan_table: LabeledTable,
    pub result: ExperimentResult,
}

/// The full workflow: split, train the GAN on the real training rows only,
/// sample `gan_counts` synthetic rows, then run the six arms.
pub fn run_pipeline(
    real: &LabeledTable,
    gan_config: &GanConfig,
    gan_counts: [usize; 2],
    config: &ExperimentConfig,
    seed: u64,
) -> Result<PipelineOutput> {
    config.grid.validate()?;
    let root = Rng::new(seed);
    let idx = split_indices(real.labels(), &config.split, &mut root.derive("split"))?;
    let train = real.select(&idx.train);
    let test = real.select(&idx.test);
    let gan = cgan::train_gan(&train, gan_config)?;
    let gan_table = cgan::sample(&gan, gan_counts, &mut root.derive("gan.sample"))?;
    let result = run_on_split(&train, &test, &gan_table, config, seed, idx.test)?;
    Ok(PipelineOutput {
        gan,
        gan_table,
        result,
    })
}

impl ExperimentResult {
    /// Table of rounded test metrics per arm, then each arm's confusion
    /// matrix, then the pattern checks.
    pub fn to_text_summary(&self) -> Result<String> {
        let mut s = String::new();
        let _ = writeln!(s, "{}", ClassificationReport::text_header());
        for arm in &self.arms {
            s.push_str(&arm.test_report()?.text_rows(&arm.name));
        }
        s.push('\n');
        for arm in &self.arms {
            s.push_str(&arm.test_confusion.to_text_block(&arm.name));
            s.push('\n');
        }
        if !self.patterns.is_empty() {
            let _ = writeln!(s, "GAN-trained vs real-trained on the test rows:");
            for p in &self.patterns {
                let _ = writeln!(
                    s,
                    "  {}: TP {} -> {}, FP {} -> {} (detects at least as many: {}, more false positives: {})",
                    p.family.short_name(),
                    p.real_tp,
                    p.gan_tp,
                    p.real_fp,
                    p.gan_fp,
                    p.gan_detects_at_least_as_many,
                    p.gan_costs_more_false_positives
                );
            }
        }
        Ok(s)
    }

    /// True when every arm was scored on the same raw test rows.
    pub fn test_sets_identical(&self) -> bool {
        let digests: Vec<_> = self.arms.iter().map(|a| a.test_digest.as_deref()).collect();
        digests
            .first()
            .is_some_and(|d| d.is_some() && digests.iter().all(|x| x == d))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surrogate::{generate, SurrogateSpec};

    #[test]
    fn split_651_to_4_gives_521_3_and_130_1() {
        let t = generate(&SurrogateSpec::default()).unwrap();
        let (train, test) = stratified_split(&t, &SplitSpec::default(), 0).unwrap();
        assert_eq!(train.class_counts(), [521, 3]);
        assert_eq!(test.class_counts(), [130, 1]);
    }

    #[test]
    fn small_split_and_determinism() {
        let labels = [0, 1, 0, 1, 0, 1, 0, 1, 0, 1];
        let spec = SplitSpec::default();
        let a = split_indices(&labels, &spec, &mut Rng::new(4)).unwrap();
        assert_eq!(a.test.len(), 2);
        assert_eq!(a.test.iter().filter(|&&i| labels[i] == 1).count(), 1);
        assert_eq!(a, split_indices(&labels, &spec, &mut Rng::new(4)).unwrap());
        let mut all = [a.train.clone(), a.test.clone()].concat();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn split_errors() {
        let spec = SplitSpec::default();
        assert!(split_indices(&[0, 0, 0], &spec, &mut Rng::new(0)).is_err());
        let bad = SplitSpec {
            test_fraction: 1.0,
            ..spec
        };
        assert!(split_indices(&[0, 1], &bad, &mut Rng::new(0)).is_err());
    }

    #[test]
    fn stratified_counts_add_up() {
        assert_eq!(stratified_counts([651, 4], 0.2), [130, 1]);
        assert_eq!(stratified_counts([5, 5], 0.2), [1, 1]);
        // 2.5 + 2.5 rounds to 3 + 3 = 6 but the total is round(5) = 5; on
        // equal remainders the lower class gives way
        assert_eq!(stratified_counts([5, 5], 0.5), [2, 3]);
        for a in 1..30 {
            for b in 1..30 {
                for f in [0.1, 0.2, 0.33, 0.5] {
                    let k = stratified_counts([a, b], f);
                    assert_eq!(k[0] + k[1], round_half_up((a + b) as f64 * f));
                }
            }
        }
    }

    #[test]
    fn canonical_grid_order() {
        let g = GridSpec::default();
        assert_eq!(g.cells(ModelFamily::Logistic).len(), 4);
        let svm = g.cells(ModelFamily::Svm);
        assert_eq!(svm.len(), 9);
        assert_eq!(
            svm[0],
            Hyperparams::Svm {
                kernel: Kernel::Linear,
                c: 0.1
            }
        );
        assert_eq!(
            svm[3],
            Hyperparams::Svm {
                kernel: Kernel::Rbf { gamma: 0.1 },
                c: 0.1
            }
        );
        assert_eq!(
            svm[4],
            Hyperparams::Svm {
                kernel: Kernel::Rbf { gamma: 1.0 },
                c: 0.1
            }
        );
        let rf = g.cells(ModelFamily::Forest);
        assert_eq!(
            rf[1],
            Hyperparams::Forest {
                n_trees: 50,
                max_depth: Some(5)
            }
        );
    }

    #[test]
    fn two_row_loo_hits_fallback_every_fold() {
        let t = LabeledTable::from_dense(["a"], &[vec![0.0], vec![1.0]], &[0, 1]).unwrap();
        let r = loo_cv(&t, &Hyperparams::Logistic { lambda: 0.1 }, 0).unwrap();
        assert_eq!(r.fallback_folds, 2);
        assert_eq!(r.predictions, vec![1, 0]);
        assert_eq!(r.validation.accuracy, 0.0);
    }

    #[test]
    fn grid_ties_go_to_first_cell() {
        let t = LabeledTable::from_dense(["a"], &[vec![0.0], vec![1.0]], &[0, 1]).unwrap();
        let cells = [
            Hyperparams::Logistic { lambda: 1.0 },
            Hyperparams::Logistic { lambda: 0.1 },
        ];
        let r = grid_search(&t, &cells, 0).unwrap();
        assert_eq!(r.best, 0);
        assert_eq!(r.cells.len(), 2);
        let one = grid_search(&t, &cells[1..], 0).unwrap();
        assert_eq!(one.best_cell().hyperparams, cells[1]);
    }

    #[test]
    fn preprocessing_ignores_test_rows() {
        let t = generate(&SurrogateSpec {
            n_total: 60,
            n_positive: 6,
            ..Default::default()
        })
        .unwrap();
        let (train, _) = stratified_split(&t, &SplitSpec::default(), 1).unwrap();
        let mut mutated = t.clone();
        let idx = split_indices(
            t.labels(),
            &SplitSpec::default(),
            &mut Rng::new(1).derive("split"),
        )
        .unwrap();
        for &i in &idx.test {
            mutated.rows_mut()[i][2] = Some(1e6);
        }
        let (train2, _) = stratified_split(&mutated, &SplitSpec::default(), 1).unwrap();
        assert_eq!(
            Preprocessor::fit(train.rows()).unwrap(),
            Preprocessor::fit(train2.rows()).unwrap()
        );
    }

    #[test]
    fn minimal_hand_written_result_reports() {
        let json = r#"{"arms":[{"name":"LR","test_confusion":{"tn":110,"fp":20,"fn":0,"tp":1}}]}"#;
        let r: ExperimentResult = serde_json::from_str(json).unwrap();
        let text = r.to_text_summary().unwrap();
        assert!(
            text.contains("LR      Prec          0.52      0.85      0.99      1.00      0.05"),
            "{text}"
        );
    }
}
