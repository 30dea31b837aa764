//! Conditional GAN for mixed continuous/binary tabular rows.
//!
//! The class label is appended as one extra input column to both networks.
//! Continuous features are modelled in standardized space through a linear
//! output; binary features through a sigmoid output, thresholded at 0.5 when
//! sampling.

use std::io::Write;
use std::path::Path;

use ndarray::{s, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::{
    bce_grad, bce_loss, sigmoid, Activation, AdamState, DenseNet, LayerSpec, MeanImputer, Mode,
    Rng, StandardScaler,
};
use crate::table::{FeatureKind, FeatureSchema, LabeledTable};

pub const MODEL_FORMAT: &str = "rarelab-cgan";
pub const MODEL_VERSION: u32 = 1;

/// Default synthetic counts for labels 0 and 1.
pub const DEFAULT_SAMPLE_COUNTS: [usize; 2] = [134, 126];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GanConfig {
    pub latent_dim: usize,
    pub generator_lr: f64,
    pub discriminator_lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub generator_hidden: Vec<usize>,
    pub discriminator_hidden: Vec<usize>,
    pub dropout: f64,
    pub seed: u64,
}

impl Default for GanConfig {
    fn default() -> Self {
        Self {
            latent_dim: 32,
            generator_lr: 0.00002,
            discriminator_lr: 0.000025,
            batch_size: 32,
            epochs: 3000,
            generator_hidden: vec![64, 64],
            discriminator_hidden: vec![64, 32],
            dropout: 0.3,
            seed: 0,
        }
    }
}

impl GanConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.latent_dim == 0 || self.batch_size == 0 {
            return bad("latent_dim and batch_size must be positive".into());
        }
        if !(self.generator_lr > 0.0) || !(self.discriminator_lr > 0.0) {
            return bad(format!(
                "learning rates must be positive (got {}, {})",
                self.generator_lr, self.discriminator_lr
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout must lie in [0, 1), got {}", self.dropout));
        }
        if self.generator_hidden.contains(&0) || self.discriminator_hidden.contains(&0) {
            return bad("hidden layer widths must be positive".into());
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub g_loss: f64,
    pub d_loss: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossRow {
    /// 1-based.
    pub epoch: usize,
    pub g_loss: f64,
    pub d_loss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GanModel {
    pub config: GanConfig,
    pub schema: FeatureSchema,
    pub generator: DenseNet,
    pub discriminator: DenseNet,
    /// Fitted on the real training rows; `None` until the model has seen
    /// data.
    pub imputer: Option<MeanImputer>,
    pub scaler: Option<StandardScaler>,
    pub loss_history: Vec<EpochLoss>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    model: GanModel,
}

impl GanModel {
    /// Freshly initialized networks with no fitted preprocessing.
    pub fn init(schema: FeatureSchema, config: GanConfig) -> Result<Self> {
        config.validate()?;
        let d = schema.len();
        let root = Rng::new(config.seed);
        let mut g_specs: Vec<LayerSpec> = config
            .generator_hidden
            .iter()
            .map(|&w| LayerSpec::new(w, Activation::LeakyRelu).with_batch_norm())
            .collect();
        // binary columns get their sigmoid in `activate_outputs`
        g_specs.push(LayerSpec::new(d, Activation::Linear));
        let mut d_specs: Vec<LayerSpec> = config
            .discriminator_hidden
            .iter()
            .map(|&w| {
                let spec = LayerSpec::new(w, Activation::LeakyRelu);
                if config.dropout > 0.0 {
                    spec.with_dropout(config.dropout)
                } else {
                    spec
                }
            })
            .collect();
        d_specs.push(LayerSpec::new(1, Activation::Sigmoid));
        let generator = DenseNet::new(
            config.latent_dim + 1,
            &g_specs,
            &mut root.derive("gan.init.generator"),
        )?;
        let discriminator =
            DenseNet::new(d + 1, &d_specs, &mut root.derive("gan.init.discriminator"))?;
        Ok(Self {
            config,
            schema,
            generator,
            discriminator,
            imputer: None,
            scaler: None,
            loss_history: Vec::new(),
        })
    }

    pub fn epochs_trained(&self) -> usize {
        self.loss_history.len()
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ModelFile {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            model: self.clone(),
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.format != MODEL_FORMAT || file.version != MODEL_VERSION {
            return Err(Error::Schema(format!(
                "expected {MODEL_FORMAT} v{MODEL_VERSION}, found {} v{}",
                file.format, file.version
            )));
        }
        Ok(file.model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Applies the sigmoid to the binary columns of the generator's linear
    /// output.
    fn activate_outputs(&self, mut out: Array2<f64>) -> Array2<f64> {
        for (j, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
            if self.schema.kind(j) == FeatureKind::Binary {
                col.mapv_inplace(sigmoid);
            }
        }
        out
    }

    fn generator_input(&self, labels: &[u8], rng: &mut Rng) -> Array2<f64> {
        let k = self.config.latent_dim;
        let mut x = Array2::zeros((labels.len(), k + 1));
        for (i, &l) in labels.iter().enumerate() {
            for v in x.slice_mut(s![i, ..k]) {
                *v = rng.normal();
            }
            x[[i, k]] = f64::from(l);
        }
        x
    }
}

fn with_label_column(features: ArrayView2<f64>, labels: &[u8]) -> Array2<f64> {
    let (n, d) = features.dim();
    let mut x = Array2::zeros((n, d + 1));
    x.slice_mut(s![.., ..d]).assign(&features);
    for (i, &l) in labels.iter().enumerate() {
        x[[i, d]] = f64::from(l);
    }
    x
}

/// Standardizes continuous columns only; binary columns keep their 0/1
/// values.
fn fit_feature_scaler(schema: &FeatureSchema, data: ArrayView2<f64>) -> Result<StandardScaler> {
    let mut scaler = StandardScaler::fit(data)?;
    for j in 0..schema.len() {
        if schema.kind(j) == FeatureKind::Binary {
            scaler.mean[j] = 0.0;
            scaler.scale[j] = 1.0;
        }
    }
    Ok(scaler)
}

fn check_finite_loss(loss: f64, epoch: usize) -> Result<()> {
    if loss.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFiniteLoss { epoch })
    }
}

/// Trains with the feature schema inferred from `real`.
pub fn train_gan(real: &LabeledTable, config: &GanConfig) -> Result<GanModel> {
    let schema = FeatureSchema::infer(real)?;
    train_gan_with_schema(real, schema, config)
}

/// Alternating adversarial training, one discriminator and one generator
/// update per epoch.
///
/// Each discriminator batch holds `batch_size` real rows and `batch_size`
/// generated rows. Real rows and conditioning labels are drawn
/// class-balanced, so the rare class is seen in every batch.
pub fn train_gan_with_schema(
    real: &LabeledTable,
    schema: FeatureSchema,
    config: &GanConfig,
) -> Result<GanModel> {
    if real.is_empty() {
        return Err(Error::EmptyInput("GAN training rows"));
    }
    schema.check_table(real)?;
    let counts = real.class_counts();
    if counts[0] == 0 || counts[1] == 0 {
        return Err(Error::SingleClassGan);
    }
    let mut model = GanModel::init(schema, config.clone())?;
    let imputer = MeanImputer::fit(real.rows())?;
    let filled = imputer.transform(real.rows())?;
    let scaler = fit_feature_scaler(&model.schema, filled.view())?;
    let data = scaler.transform(filled.view())?;
    model.imputer = Some(imputer);
    model.scaler = Some(scaler);

    let by_class: [Vec<usize>; 2] = [0u8, 1].map(|c| {
        real.labels()
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == c)
            .map(|(i, _)| i)
            .collect()
    });
    let root = Rng::new(config.seed);
    let mut batch_rng = root.derive("gan.batches");
    let mut noise_rng = root.derive("gan.noise");
    let mut dropout_rng = root.derive("dropout");
    let mut adam_g = AdamState::new(config.generator_lr, &model.generator.params())?;
    let mut adam_d = AdamState::new(config.discriminator_lr, &model.discriminator.params())?;
    let b = config.batch_size;
    let d = model.schema.len();

    for epoch in 1..=config.epochs {
        // discriminator: real rows labelled 1, generated rows labelled 0
        let real_labels: Vec<u8> = (0..b).map(|_| u8::from(batch_rng.bernoulli(0.5))).collect();
        let real_rows: Vec<usize> = real_labels
            .iter()
            .map(|&l| by_class[usize::from(l)][batch_rng.below(by_class[usize::from(l)].len())])
            .collect();
        let real_x = data.select(Axis(0), &real_rows);
        let fake_labels: Vec<u8> = (0..b).map(|_| u8::from(batch_rng.bernoulli(0.5))).collect();
        let z = model.generator_input(&fake_labels, &mut noise_rng);
        let (fake_pre, _) = model
            .generator
            .forward(z.view(), Mode::Train, &mut dropout_rng)?;
        let fake_x = model.activate_outputs(fake_pre);

        let mut d_in = Array2::zeros((2 * b, d + 1));
        d_in.slice_mut(s![..b, ..])
            .assign(&with_label_column(real_x.view(), &real_labels));
        d_in.slice_mut(s![b.., ..])
            .assign(&with_label_column(fake_x.view(), &fake_labels));
        let targets: Vec<f64> = (0..2 * b).map(|i| if i < b { 1.0 } else { 0.0 }).collect();
        let (d_out, d_cache) =
            model
                .discriminator
                .forward(d_in.view(), Mode::Train, &mut dropout_rng)?;
        let d_pred = d_out.column(0).to_vec();
        let d_loss = bce_loss(&d_pred, &targets)?;
        check_finite_loss(d_loss, epoch)?;
        let grad =
            Array2::from_shape_vec((2 * b, 1), bce_grad(&d_pred, &targets)?).expect("column");
        let d_grads = model.discriminator.backward(&d_cache, grad.view())?;
        adam_d.step(&mut model.discriminator.params_mut(), &d_grads.tensors())?;
        model.discriminator.commit_batch_stats(&d_cache)?;

        // generator: push D(G(z)) toward "real" through the frozen
        // discriminator
        let labels: Vec<u8> = (0..b).map(|_| u8::from(batch_rng.bernoulli(0.5))).collect();
        let z = model.generator_input(&labels, &mut noise_rng);
        let (g_pre, g_cache) = model
            .generator
            .forward(z.view(), Mode::Train, &mut dropout_rng)?;
        let g_x = model.activate_outputs(g_pre);
        let d_in = with_label_column(g_x.view(), &labels);
        let (d_out, d_cache) =
            model
                .discriminator
                .forward(d_in.view(), Mode::Train, &mut dropout_rng)?;
        let d_pred = d_out.column(0).to_vec();
        let ones = vec![1.0; b];
        let g_loss = bce_loss(&d_pred, &ones)?;
        check_finite_loss(g_loss, epoch)?;
        let grad = Array2::from_shape_vec((b, 1), bce_grad(&d_pred, &ones)?).expect("column");
        let through_d = model.discriminator.backward(&d_cache, grad.view())?;
        let mut grad_out = through_d.input.slice(s![.., ..d]).to_owned();
        for j in 0..d {
            if model.schema.kind(j) == FeatureKind::Binary {
                for i in 0..b {
                    let p = g_x[[i, j]];
                    grad_out[[i, j]] *= p * (1.0 - p);
                }
            }
        }
        let g_grads = model.generator.backward(&g_cache, grad_out.view())?;
        adam_g.step(&mut model.generator.params_mut(), &g_grads.tensors())?;
        model.generator.commit_batch_stats(&g_cache)?;

        model.loss_history.push(EpochLoss { g_loss, d_loss });
    }
    Ok(model)
}

/// Draws `counts[0]` label-0 rows followed by `counts[1]` label-1 rows, in
/// original feature units.
pub fn sample(model: &GanModel, counts: [usize; 2], rng: &mut Rng) -> Result<LabeledTable> {
    let scaler = model.scaler.as_ref().ok_or(Error::Untrained)?;
    let mut table = LabeledTable::new(model.schema.names());
    let labels: Vec<u8> = std::iter::repeat_n(0u8, counts[0])
        .chain(std::iter::repeat_n(1u8, counts[1]))
        .collect();
    if labels.is_empty() {
        return Ok(table);
    }
    let z = model.generator_input(&labels, rng);
    // inference mode draws no dropout masks, so `rng` is only used for noise
    let (out, _) = model.generator.forward(z.view(), Mode::Infer, rng)?;
    let out = model.activate_outputs(out);
    let values = scaler.inverse_transform(out.view())?;
    for (row, &label) in values.rows().into_iter().zip(&labels) {
        let cells = row
            .iter()
            .enumerate()
            .map(|(j, &v)| match model.schema.kind(j) {
                FeatureKind::Binary => Some(if out[[table.len(), j]] >= 0.5 {
                    1.0
                } else {
                    0.0
                }),
                FeatureKind::Continuous => Some(v),
            })
            .collect();
        table.push(cells, label)?;
    }
    if table
        .rows()
        .iter()
        .flatten()
        .any(|v| !v.is_some_and(f64::is_finite))
    {
        return Err(Error::NonFiniteOutput("generated rows"));
    }
    Ok(table)
}

pub fn export_loss_history(model: &GanModel) -> Vec<LossRow> {
    model
        .loss_history
        .iter()
        .enumerate()
        .map(|(i, l)| LossRow {
            epoch: i + 1,
            g_loss: l.g_loss,
            d_loss: l.d_loss,
        })
        .collect()
}

/// `epoch,g_loss,d_loss`, one row per trained epoch.
pub fn write_loss_csv<W: Write>(model: &GanModel, mut out: W) -> Result<()> {
    writeln!(out, "epoch,g_loss,d_loss")?;
    for row in export_loss_history(model) {
        writeln!(out, "{},{},{}", row.epoch, row.g_loss, row.d_loss)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config(epochs: usize) -> GanConfig {
        GanConfig {
            latent_dim: 4,
            batch_size: 8,
            epochs,
            generator_hidden: vec![8],
            discriminator_hidden: vec![8],
            ..Default::default()
        }
    }

    fn data() -> LabeledTable {
        crate::surrogate::generate(&crate::surrogate::SurrogateSpec {
            n_total: 60,
            n_positive: 6,
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn default_learning_rates() {
        let c = GanConfig::default();
        assert_eq!(c.generator_lr, 0.00002);
        assert_eq!(c.discriminator_lr, 0.000025);
        assert_eq!((c.latent_dim, c.batch_size, c.epochs), (32, 32, 3000));
    }

    #[test]
    fn network_shapes() {
        let m = GanModel::init(FeatureSchema::canonical(), GanConfig::default()).unwrap();
        assert_eq!(m.generator.input_dim(), 33);
        assert_eq!(m.generator.output_dim(), 4);
        assert_eq!(m.discriminator.input_dim(), 5);
        assert_eq!(m.discriminator.output_dim(), 1);
    }

    #[test]
    fn zero_epochs_gives_untrained_model_that_still_samples() {
        let m = train_gan(&data(), &small_config(0)).unwrap();
        assert!(export_loss_history(&m).is_empty());
        let t = sample(&m, [5, 5], &mut Rng::new(1)).unwrap();
        assert_eq!(t.len(), 10);
        assert_eq!(t.class_counts(), [5, 5]);
        for r in t.rows() {
            assert!(r.iter().all(|v| v.unwrap().is_finite()));
            assert!(matches!(r[0], Some(0.0) | Some(1.0)));
            assert!(matches!(r[1], Some(0.0) | Some(1.0)));
        }
        assert!(sample(&m, [0, 0], &mut Rng::new(1)).unwrap().is_empty());
    }

    #[test]
    fn sampling_without_fit_is_an_error() {
        let m = GanModel::init(FeatureSchema::canonical(), small_config(0)).unwrap();
        assert!(matches!(
            sample(&m, [1, 1], &mut Rng::new(0)),
            Err(Error::Untrained)
        ));
    }

    #[test]
    fn single_class_rejected() {
        let t = data();
        let idx: Vec<usize> = (0..t.len()).filter(|&i| t.labels()[i] == 0).collect();
        let err = train_gan(&t.select(&idx), &small_config(3)).unwrap_err();
        assert_eq!(err.to_string(), "conditional GAN requires both classes");
    }

    #[test]
    fn history_is_deterministic_and_finite() {
        let a = train_gan(&data(), &small_config(3)).unwrap();
        let b = train_gan(&data(), &small_config(3)).unwrap();
        let h = export_loss_history(&a);
        assert_eq!(h.len(), 3);
        assert_eq!(h.iter().map(|r| r.epoch).collect::<Vec<_>>(), vec![1, 2, 3]);
        assert!(h
            .iter()
            .all(|r| r.g_loss.is_finite() && r.g_loss >= 0.0 && r.d_loss >= 0.0));
        assert_eq!(a, b);
        let mut csv = Vec::new();
        write_loss_csv(&a, &mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 4);
    }

    #[test]
    fn model_file_round_trip() {
        let m = train_gan(&data(), &small_config(5)).unwrap();
        let back = GanModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
        let a = sample(&m, [4, 4], &mut Rng::new(7)).unwrap();
        let b = sample(&back, [4, 4], &mut Rng::new(7)).unwrap();
        assert_eq!(a, b);
        let wrong = m.to_json().unwrap().replace(MODEL_FORMAT, "other");
        assert!(matches!(GanModel::from_json(&wrong), Err(Error::Schema(_))));
    }

    #[test]
    fn exact_sample_counts() {
        let m = train_gan(&data(), &small_config(2)).unwrap();
        let t = sample(&m, DEFAULT_SAMPLE_COUNTS, &mut Rng::new(3)).unwrap();
        assert_eq!(t.len(), 260);
        assert_eq!(t.class_counts(), [134, 126]);
    }
}
