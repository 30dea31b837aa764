//! Synthetic stand-in for the restricted survey cohort: 655 rows with four
//! positives, balanced sex overall, a 3:1 female skew among positives, and
//! Panic/Suicidal logits shifted upward for the positive class.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::Rng;
use crate::psychometrics::{fit_rasch, simulate_responses, FitOptions, RaschFit, ResponseMatrix};
use crate::table::LabeledTable;

/// Mean and standard deviation of a Gaussian on the logit scale.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogitNormal {
    pub mean: f64,
    pub sd: f64,
}

impl LogitNormal {
    pub const fn new(mean: f64, sd: f64) -> Self {
        Self { mean, sd }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SurrogateSpec {
    pub n_total: usize,
    pub n_positive: usize,
    /// Fraction of all rows with `sex = 1` (female).
    pub female_fraction: f64,
    /// Fraction of positive rows that are female.
    pub positive_female_fraction: f64,
    pub panic_negative: LogitNormal,
    pub panic_positive: LogitNormal,
    pub suicidal_negative: LogitNormal,
    pub suicidal_positive: LogitNormal,
    /// Fraction of Panic/Suicidal cells left empty.
    pub missing_rate: f64,
    pub seed: u64,
}

impl Default for SurrogateSpec {
    fn default() -> Self {
        Self {
            n_total: 655,
            n_positive: 4,
            female_fraction: 0.5,
            positive_female_fraction: 0.75,
            panic_negative: LogitNormal::new(-1.0, 3.0),
            panic_positive: LogitNormal::new(2.5, 1.0),
            suicidal_negative: LogitNormal::new(-1.5, 1.5),
            suicidal_positive: LogitNormal::new(2.0, 1.0),
            missing_rate: 0.01,
            seed: 0,
        }
    }
}

impl SurrogateSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_positive >= self.n_total {
            return Err(Error::Infeasible(format!(
                "{} positives do not fit in {} rows",
                self.n_positive, self.n_total
            )));
        }
        for (name, f) in [
            ("female_fraction", self.female_fraction),
            ("positive_female_fraction", self.positive_female_fraction),
            ("missing_rate", self.missing_rate),
        ] {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must lie in [0, 1], got {f}"
                )));
            }
        }
        for d in [
            self.panic_negative,
            self.panic_positive,
            self.suicidal_negative,
            self.suicidal_positive,
        ] {
            if !d.mean.is_finite() || !(d.sd >= 0.0) || !d.sd.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "bad logit distribution {d:?}"
                )));
            }
        }
        let (neg_f, pos_f) = self.female_counts()?;
        debug_assert!(neg_f + pos_f <= self.n_total);
        Ok(())
    }

    /// Female counts among (negatives, positives). Both targets are rounded
    /// half-up; the negative count absorbs the difference.
    fn female_counts(&self) -> Result<(usize, usize)> {
        let n_neg = self.n_total - self.n_positive;
        let pos = round_half_up(self.positive_female_fraction * self.n_positive as f64);
        let total = round_half_up(self.female_fraction * self.n_total as f64);
        let neg = total
            .checked_sub(pos)
            .filter(|&f| f <= n_neg)
            .ok_or_else(|| {
                Error::Infeasible(format!(
                    "{total} females overall cannot include {pos} of {} positives",
                    self.n_positive
                ))
            })?;
        Ok((neg, pos))
    }
}

fn round_half_up(x: f64) -> usize {
    (x + 0.5 + 1e-9).floor() as usize
}

/// Labels and sex per row, in shuffled order.
fn draw_demographics(spec: &SurrogateSpec, rng: &mut Rng) -> Result<Vec<(u8, u8)>> {
    let (neg_f, pos_f) = spec.female_counts()?;
    let n_neg = spec.n_total - spec.n_positive;
    let mut rows = Vec::with_capacity(spec.n_total);
    rows.extend((0..n_neg).map(|i| (0u8, u8::from(i < neg_f))));
    rows.extend((0..spec.n_positive).map(|i| (1u8, u8::from(i < pos_f))));
    rng.shuffle(&mut rows);
    Ok(rows)
}

fn draw_latent(spec: &SurrogateSpec, labels: &[u8], rng: &mut Rng) -> (Vec<f64>, Vec<f64>) {
    let mut panic = Vec::with_capacity(labels.len());
    let mut suicidal = Vec::with_capacity(labels.len());
    for &label in labels {
        let (p, s) = if label == 1 {
            (spec.panic_positive, spec.suicidal_positive)
        } else {
            (spec.panic_negative, spec.suicidal_negative)
        };
        panic.push(rng.gaussian(p.mean, p.sd));
        suicidal.push(rng.gaussian(s.mean, s.sd));
    }
    (panic, suicidal)
}

/// Blanks `round(rate * 2n)` of the Panic/Suicidal cells, chosen uniformly.
fn apply_missing(table: &mut LabeledTable, rate: f64, rng: &mut Rng) {
    let n = table.len();
    let cells = 2 * n;
    let k = round_half_up(rate * cells as f64).min(cells);
    let panic = table.feature_index("Panic").expect("canonical");
    let suicidal = table.feature_index("Suicidal").expect("canonical");
    for c in rng.sample_indices(cells, k) {
        let col = if c < n { panic } else { suicidal };
        table.rows_mut()[c % n][col] = None;
    }
}

fn assemble(demo: &[(u8, u8)], panic: &[f64], suicidal: &[f64]) -> Result<LabeledTable> {
    let mut table = LabeledTable::canonical();
    for (i, &(label, sex)) in demo.iter().enumerate() {
        let s = f64::from(sex);
        table.push(
            vec![Some(s), Some(s), Some(panic[i]), Some(suicidal[i])],
            label,
        )?;
    }
    Ok(table)
}

/// Draws the canonical `sex,Female,Panic,Suicidal,label` table directly on
/// the logit scale.
pub fn generate(spec: &SurrogateSpec) -> Result<LabeledTable> {
    spec.validate()?;
    let root = Rng::new(spec.seed);
    let demo = draw_demographics(spec, &mut root.derive("surrogate.demographics"))?;
    let labels: Vec<u8> = demo.iter().map(|d| d.0).collect();
    let (panic, suicidal) = draw_latent(spec, &labels, &mut root.derive("surrogate.latent"));
    let mut table = assemble(&demo, &panic, &suicidal)?;
    apply_missing(
        &mut table,
        spec.missing_rate,
        &mut root.derive("surrogate.missing"),
    );
    Ok(table)
}

/// Item parameters used to simulate raw survey responses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ItemBank {
    /// One threshold per dichotomous Panic symptom.
    pub panic: Vec<Vec<f64>>,
    /// Step thresholds per Suicidal item (1 for yes/no, 3 for 4-point items).
    pub suicidal: Vec<Vec<f64>>,
}

impl Default for ItemBank {
    /// Seven dichotomous symptoms spread evenly over [-4, 2] (centred on the
    /// bulk of the negative class) and four suicidality items: two 4-point
    /// ordinal and two yes/no.
    fn default() -> Self {
        Self {
            panic: (0..7).map(|j| vec![-4.0 + j as f64]).collect(),
            suicidal: vec![
                vec![-1.5, -0.5, 0.5],
                vec![-1.0, 0.0, 1.0],
                vec![0.0],
                vec![1.0],
            ],
        }
    }
}

impl ItemBank {
    /// Takes item parameters from previously fitted Panic and Suicidal
    /// models.
    pub fn from_fits(panic: &RaschFit, suicidal: &RaschFit) -> Self {
        Self {
            panic: panic.thresholds.clone(),
            suicidal: suicidal.thresholds.clone(),
        }
    }

    fn categories(items: &[Vec<f64>]) -> Result<Vec<u8>> {
        items
            .iter()
            .map(|d| {
                u8::try_from(d.len() + 1)
                    .ok()
                    .filter(|_| !d.is_empty() && d.iter().all(|v| v.is_finite()))
                    .ok_or_else(|| Error::InvalidParameter(format!("bad item thresholds {d:?}")))
            })
            .collect()
    }
}

/// Output of [`generate_from_items`]: the scored table plus everything
/// needed to audit the feature construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ItemSurrogate {
    pub table: LabeledTable,
    pub panic_theta: Vec<f64>,
    pub suicidal_theta: Vec<f64>,
    pub panic_responses: ResponseMatrix,
    pub suicidal_responses: ResponseMatrix,
    pub panic_fit: RaschFit,
    pub suicidal_fit: RaschFit,
}

/// Simulates raw item responses from per-class latent traits, estimates
/// Rasch measures from those responses and emits the measures as the Panic
/// and Suicidal features.
pub fn generate_from_items(spec: &SurrogateSpec, bank: &ItemBank) -> Result<ItemSurrogate> {
    spec.validate()?;
    let panic_cats = ItemBank::categories(&bank.panic)?;
    let suicidal_cats = ItemBank::categories(&bank.suicidal)?;
    let root = Rng::new(spec.seed);
    let demo = draw_demographics(spec, &mut root.derive("surrogate.demographics"))?;
    let labels: Vec<u8> = demo.iter().map(|d| d.0).collect();
    let (panic_theta, suicidal_theta) =
        draw_latent(spec, &labels, &mut root.derive("surrogate.latent"));

    let panic_rows = simulate_responses(
        &panic_theta,
        &bank.panic,
        &mut root.derive("surrogate.panic_items"),
    );
    let suicidal_rows = simulate_responses(
        &suicidal_theta,
        &bank.suicidal,
        &mut root.derive("surrogate.suicidal_items"),
    );
    let names = |prefix: &str, k: usize| (1..=k).map(|j| format!("{prefix}{j}")).collect();
    let panic_responses =
        ResponseMatrix::new(names("panic", panic_cats.len()), panic_cats, panic_rows)?;
    let suicidal_responses = ResponseMatrix::new(
        names("suicidal", suicidal_cats.len()),
        suicidal_cats,
        suicidal_rows,
    )?;

    let options = FitOptions::default();
    let panic_fit = fit_rasch(&panic_responses, &options)?;
    let suicidal_fit = fit_rasch(&suicidal_responses, &options)?;

    let mut table = assemble(
        &demo,
        &panic_fit.person_measures,
        &suicidal_fit.person_measures,
    )?;
    apply_missing(
        &mut table,
        spec.missing_rate,
        &mut root.derive("surrogate.missing"),
    );
    Ok(ItemSurrogate {
        table,
        panic_theta,
        suicidal_theta,
        panic_responses,
        suicidal_responses,
        panic_fit,
        suicidal_fit,
    })
}
