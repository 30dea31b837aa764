//! Rasch measurement: dichotomous Rasch and Masters partial-credit models
//! estimated by joint maximum likelihood, person scoring, and Cronbach's
//! alpha.
//!
//! Categories are 0-based. Item parameters are identified by requiring the
//! item difficulties (mean step threshold per item) to sum to zero. Extreme
//! raw scores (zero or perfect) are pulled 0.3 score points inward so their
//! measures stay finite.

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::Rng;

/// Score points by which zero and perfect raw scores are moved inward.
pub const EXTREME_ADJUSTMENT: f64 = 0.3;

const MAX_STEP: f64 = 1.0;

/// Persons x items, `None` where a response is missing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResponseMatrix {
    item_names: Vec<String>,
    /// Category count per item (2 for dichotomous items).
    categories: Vec<u8>,
    responses: Vec<Vec<Option<u8>>>,
}

impl ResponseMatrix {
    pub fn new(
        item_names: Vec<String>,
        categories: Vec<u8>,
        responses: Vec<Vec<Option<u8>>>,
    ) -> Result<Self> {
        if item_names.len() != categories.len() {
            return Err(Error::LengthMismatch {
                what: "item names vs category counts",
                left: item_names.len(),
                right: categories.len(),
            });
        }
        if let Some(&c) = categories.iter().find(|&&c| c < 2) {
            return Err(Error::InvalidParameter(format!(
                "an item needs at least 2 categories, got {c}"
            )));
        }
        for (n, row) in responses.iter().enumerate() {
            if row.len() != categories.len() {
                return Err(Error::LengthMismatch {
                    what: "response row vs item count",
                    left: row.len(),
                    right: categories.len(),
                });
            }
            for (j, v) in row.iter().enumerate() {
                if let Some(v) = v {
                    if *v >= categories[j] {
                        return Err(Error::InvalidParameter(format!(
                            "person {n}, item {j}: response {v} outside 0..{}",
                            categories[j]
                        )));
                    }
                }
            }
        }
        Ok(Self {
            item_names,
            categories,
            responses,
        })
    }

    /// Items named `item1..itemK`, categories inferred as `max observed + 1`
    /// (at least 2).
    pub fn from_responses(responses: Vec<Vec<Option<u8>>>) -> Result<Self> {
        let k = responses.first().map_or(0, Vec::len);
        let categories = (0..k)
            .map(|j| {
                responses
                    .iter()
                    .filter_map(|r| r.get(j).copied().flatten())
                    .max()
                    .map_or(2, |m| (m + 1).max(2))
            })
            .collect();
        let names = (1..=k).map(|j| format!("item{j}")).collect();
        Self::new(names, categories, responses)
    }

    pub fn persons(&self) -> usize {
        self.responses.len()
    }

    pub fn items(&self) -> usize {
        self.categories.len()
    }

    pub fn categories(&self) -> &[u8] {
        &self.categories
    }

    pub fn item_names(&self) -> &[String] {
        &self.item_names
    }

    pub fn responses(&self) -> &[Vec<Option<u8>>] {
        &self.responses
    }

    pub fn is_dichotomous(&self) -> bool {
        self.categories.iter().all(|&c| c == 2)
    }

    pub fn is_complete(&self) -> bool {
        self.responses.iter().flatten().all(Option::is_some)
    }

    /// Keeps only the listed items, in the given order.
    pub fn select_items(&self, items: &[usize]) -> Self {
        Self {
            item_names: items.iter().map(|&j| self.item_names[j].clone()).collect(),
            categories: items.iter().map(|&j| self.categories[j]).collect(),
            responses: self
                .responses
                .iter()
                .map(|r| items.iter().map(|&j| r[j]).collect())
                .collect(),
        }
    }

    /// Reads a persons x items CSV with a header of item names. Empty cells
    /// are missing; `offset` is subtracted from every response (1 for
    /// 1-based ordinal coding).
    pub fn read_csv<R: Read>(reader: R, offset: u8) -> Result<Self> {
        let mut csv = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header = csv
            .headers()
            .map_err(|e| Error::Parse {
                line: 1,
                message: e.to_string(),
            })?
            .clone();
        let names: Vec<String> = header.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for record in csv.records() {
            let record = record.map_err(|e| Error::Parse {
                line: e.position().map_or(0, |p| p.line()),
                message: e.to_string(),
            })?;
            let line = record.position().map_or(0, |p| p.line());
            if record.len() != names.len() {
                return Err(Error::Parse {
                    line,
                    message: format!("expected {} cells, found {}", names.len(), record.len()),
                });
            }
            let row = record
                .iter()
                .map(|cell| {
                    if cell.is_empty() {
                        return Ok(None);
                    }
                    let v: u8 = cell.parse().map_err(|_| Error::Parse {
                        line,
                        message: format!("`{cell}` is not a non-negative integer"),
                    })?;
                    v.checked_sub(offset).map(Some).ok_or_else(|| Error::Parse {
                        line,
                        message: format!("response {v} is below the offset {offset}"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        let mut m = Self::from_responses(rows)?;
        m.item_names = names;
        Ok(m)
    }

    /// Inverse of [`ResponseMatrix::read_csv`] with the same `offset`.
    pub fn write_csv<W: Write>(&self, mut out: W, offset: u8) -> Result<()> {
        writeln!(out, "{}", self.item_names.join(","))?;
        for row in &self.responses {
            let cells: Vec<String> = row
                .iter()
                .map(|v| {
                    v.map_or(String::new(), |v| {
                        (u16::from(v) + u16::from(offset)).to_string()
                    })
                })
                .collect();
            writeln!(out, "{}", cells.join(","))?;
        }
        Ok(())
    }
}

/// Category probabilities under the partial-credit model:
/// `P(X = k) ∝ exp(sum_{j <= k} (theta - delta_j))`, empty sum for `k = 0`.
pub fn pcm_probability(theta: f64, thresholds: &[f64]) -> Vec<f64> {
    let mut logits = Vec::with_capacity(thresholds.len() + 1);
    logits.push(0.0);
    let mut acc = 0.0;
    for d in thresholds {
        acc += theta - d;
        logits.push(acc);
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut probs: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= z;
    }
    probs
}

/// Draws one response per (person, item) from the partial-credit model.
pub fn simulate_responses(
    thetas: &[f64],
    thresholds: &[Vec<f64>],
    rng: &mut Rng,
) -> Vec<Vec<Option<u8>>> {
    thetas
        .iter()
        .map(|&theta| {
            thresholds
                .iter()
                .map(|d| {
                    let probs = pcm_probability(theta, d);
                    let u = rng.uniform();
                    let mut acc = 0.0;
                    let mut cat = probs.len() - 1;
                    for (k, p) in probs.iter().enumerate() {
                        acc += p;
                        if u < acc {
                            cat = k;
                            break;
                        }
                    }
                    Some(cat as u8)
                })
                .collect()
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RaschModel {
    Dichotomous,
    PartialCredit,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub max_iter: usize,
    /// Converged once no parameter moves by this much in a sweep.
    pub tol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            tol: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RaschFit {
    pub model: RaschModel,
    pub item_names: Vec<String>,
    /// Step thresholds per item, logits (one per item when dichotomous).
    pub thresholds: Vec<Vec<f64>>,
    /// Mean step threshold per item; these sum to zero.
    pub item_difficulties: Vec<f64>,
    pub person_measures: Vec<f64>,
    pub person_raw_scores: Vec<f64>,
    pub person_extreme: Vec<bool>,
    pub converged: bool,
    pub iterations: usize,
    pub max_change: f64,
}

impl RaschFit {
    pub fn write_person_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "person,raw_score,measure,extreme")?;
        for (n, ((raw, m), e)) in self
            .person_raw_scores
            .iter()
            .zip(&self.person_measures)
            .zip(&self.person_extreme)
            .enumerate()
        {
            writeln!(out, "{},{raw},{m},{}", n + 1, u8::from(*e))?;
        }
        Ok(())
    }

    pub fn write_item_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "item,step,threshold")?;
        for (name, steps) in self.item_names.iter().zip(&self.thresholds) {
            for (k, d) in steps.iter().enumerate() {
                writeln!(out, "{name},{},{d}", k + 1)?;
            }
        }
        Ok(())
    }
}

/// Raw score and highest attainable score over the answered items in `row`,
/// restricted to items where `items[j]` holds.
fn raw_and_max(row: &[Option<u8>], categories: &[u8], items: &[bool]) -> (f64, f64, usize) {
    let mut raw = 0.0;
    let mut max = 0.0;
    let mut answered = 0;
    for (j, v) in row.iter().enumerate() {
        if let (Some(v), true) = (v, items[j]) {
            raw += f64::from(*v);
            max += f64::from(categories[j] - 1);
            answered += 1;
        }
    }
    (raw, max, answered)
}

/// Target raw score for a person: zero and perfect scores move inward by
/// [`EXTREME_ADJUSTMENT`].
fn adjusted_target(raw: f64, max: f64) -> (f64, bool) {
    if raw <= 0.0 {
        (EXTREME_ADJUSTMENT, true)
    } else if raw >= max {
        (max - EXTREME_ADJUSTMENT, true)
    } else {
        (raw, false)
    }
}

fn check_estimable(data: &ResponseMatrix) -> Result<()> {
    if data.items() < 2 || data.persons() < 2 {
        return Err(Error::InvalidParameter(
            "estimation needs at least 2 items and 2 persons".into(),
        ));
    }
    for j in 0..data.items() {
        if data.responses.iter().all(|r| r[j].is_none()) {
            return Err(Error::InvalidParameter(format!(
                "item {j} has no responses"
            )));
        }
    }
    for (n, row) in data.responses.iter().enumerate() {
        if row.iter().all(Option::is_none) {
            return Err(Error::InvalidParameter(format!(
                "person {n} has no responses"
            )));
        }
    }
    Ok(())
}

fn clamp_step(step: f64) -> f64 {
    step.clamp(-MAX_STEP, MAX_STEP)
}

/// Persons and items that stay in the joint estimation: repeatedly drops
/// persons with zero/perfect scores over the remaining items and items
/// nobody (or everybody) among the remaining persons scored on.
struct Core {
    persons: Vec<bool>,
    items: Vec<bool>,
}

impl Core {
    fn find(data: &ResponseMatrix) -> Result<Self> {
        let mut persons = vec![true; data.persons()];
        let mut items = vec![true; data.items()];
        loop {
            let mut changed = false;
            for (n, row) in data.responses.iter().enumerate() {
                if persons[n] {
                    let (raw, max, answered) = raw_and_max(row, &data.categories, &items);
                    if answered == 0 || raw <= 0.0 || raw >= max {
                        persons[n] = false;
                        changed = true;
                    }
                }
            }
            for j in 0..data.items() {
                if items[j] {
                    let top = data.categories[j] - 1;
                    let values: Vec<u8> = data
                        .responses
                        .iter()
                        .zip(&persons)
                        .filter_map(|(r, &active)| if active { r[j] } else { None })
                        .collect();
                    if values.iter().all(|&v| v == 0) || values.iter().all(|&v| v == top) {
                        items[j] = false;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        if !persons.contains(&true) || !items.contains(&true) {
            return Err(Error::InvalidParameter(
                "every person or item has an extreme score; nothing to estimate".into(),
            ));
        }
        Ok(Self { persons, items })
    }
}

/// Observed count at or above each step of item `j` among the selected
/// persons, and the number of those persons who answered it.
fn step_counts(data: &ResponseMatrix, j: usize, persons: &[bool]) -> (Vec<f64>, f64) {
    let steps = usize::from(data.categories[j]) - 1;
    let mut counts = vec![0.0; steps];
    let mut observed = 0.0;
    for (row, _) in data.responses.iter().zip(persons).filter(|(_, &a)| a) {
        if let Some(v) = row[j] {
            observed += 1.0;
            for c in counts.iter_mut().take(usize::from(v)) {
                *c += 1.0;
            }
        }
    }
    (counts, observed)
}

fn initial_theta(raw: f64, max: f64) -> f64 {
    let (t, _) = adjusted_target(raw, max);
    (t / (max - t)).ln()
}

/// Dispatches to [`fit_dichotomous`] when every item has two categories and
/// to [`fit_partial_credit`] otherwise.
pub fn fit_rasch(data: &ResponseMatrix, options: &FitOptions) -> Result<RaschFit> {
    if data.is_dichotomous() {
        fit_dichotomous(data, options)
    } else {
        fit_partial_credit(data, options)
    }
}

/// Dichotomous Rasch model `P(X = 1) = sigmoid(theta - b)` by JMLE.
pub fn fit_dichotomous(data: &ResponseMatrix, options: &FitOptions) -> Result<RaschFit> {
    check_estimable(data)?;
    if !data.is_dichotomous() {
        return Err(Error::InvalidParameter(
            "dichotomous fit needs 2-category items".into(),
        ));
    }
    let core = Core::find(data)?;
    let person_targets: Vec<f64> = data
        .responses
        .iter()
        .map(|r| raw_and_max(r, &data.categories, &core.items).0)
        .collect();
    let item_targets: Vec<f64> = (0..data.items())
        .map(|j| step_counts(data, j, &core.persons).0[0])
        .collect();

    let mut theta: Vec<f64> = data
        .responses
        .iter()
        .map(|r| {
            let (raw, max, _) = raw_and_max(r, &data.categories, &core.items);
            initial_theta(raw, max)
        })
        .collect();
    let mut b = vec![0.0; data.items()];
    let core_items: Vec<usize> = (0..data.items()).filter(|&j| core.items[j]).collect();

    let mut iterations = 0;
    let mut max_change = f64::INFINITY;
    while iterations < options.max_iter && max_change >= options.tol {
        iterations += 1;
        max_change = 0.0;
        for (n, row) in data.responses.iter().enumerate() {
            if !core.persons[n] {
                continue;
            }
            let (mut expected, mut info) = (0.0, 0.0);
            for &j in &core_items {
                if row[j].is_some() {
                    let p = crate::numkit::sigmoid(theta[n] - b[j]);
                    expected += p;
                    info += p * (1.0 - p);
                }
            }
            let step = clamp_step((person_targets[n] - expected) / info);
            theta[n] += step;
            max_change = max_change.max(step.abs());
        }
        for &j in &core_items {
            let (mut expected, mut info) = (0.0, 0.0);
            for (n, row) in data.responses.iter().enumerate() {
                if core.persons[n] && row[j].is_some() {
                    let p = crate::numkit::sigmoid(theta[n] - b[j]);
                    expected += p;
                    info += p * (1.0 - p);
                }
            }
            let step = clamp_step((expected - item_targets[j]) / info);
            b[j] += step;
            max_change = max_change.max(step.abs());
        }
        let shift = core_items.iter().map(|&j| b[j]).sum::<f64>() / core_items.len() as f64;
        core_items.iter().for_each(|&j| b[j] -= shift);
        theta.iter_mut().for_each(|v| *v -= shift);
    }

    let thresholds = b.iter().map(|&d| vec![d]).collect();
    Ok(finish(
        data,
        &core,
        RaschModel::Dichotomous,
        theta,
        thresholds,
        iterations,
        max_change,
        options.tol,
    ))
}

/// Expected score and its variance for one person on one item.
fn item_moments(theta: f64, thresholds: &[f64]) -> (f64, f64) {
    let probs = pcm_probability(theta, thresholds);
    let (mut e, mut e2) = (0.0, 0.0);
    for (k, p) in probs.iter().enumerate() {
        let k = k as f64;
        e += k * p;
        e2 += k * k * p;
    }
    (e, e2 - e * e)
}

/// One diagonal Newton step on every threshold of an item, given the
/// measures of the persons who answered it. Returns the largest move.
fn threshold_step(delta: &mut [f64], thetas: impl Iterator<Item = f64>, targets: &[f64]) -> f64 {
    let steps = delta.len();
    let mut expected = vec![0.0; steps];
    let mut info = vec![0.0; steps];
    for theta in thetas {
        let probs = pcm_probability(theta, delta);
        // P(X >= s) for s = steps..1
        let mut tail = 0.0;
        for s in (1..=steps).rev() {
            tail += probs[s];
            expected[s - 1] += tail;
            info[s - 1] += tail * (1.0 - tail);
        }
    }
    let mut largest: f64 = 0.0;
    for s in 0..steps {
        let step = clamp_step((expected[s] - targets[s]) / info[s]);
        delta[s] += step;
        largest = largest.max(step.abs());
    }
    largest
}

fn clamp_counts(counts: &[f64], observed: f64) -> Vec<f64> {
    counts
        .iter()
        .map(|&c| c.clamp(EXTREME_ADJUSTMENT, observed - EXTREME_ADJUSTMENT))
        .collect()
}

/// Masters partial-credit model by JMLE.
pub fn fit_partial_credit(data: &ResponseMatrix, options: &FitOptions) -> Result<RaschFit> {
    check_estimable(data)?;
    let core = Core::find(data)?;
    let person_targets: Vec<f64> = data
        .responses
        .iter()
        .map(|r| raw_and_max(r, &data.categories, &core.items).0)
        .collect();
    // A category nobody in the core used would send a threshold to
    // infinity; those counts get the same 0.3 pull as extreme scores.
    let step_targets: Vec<Vec<f64>> = (0..data.items())
        .map(|j| {
            let (counts, observed) = step_counts(data, j, &core.persons);
            clamp_counts(&counts, observed)
        })
        .collect();

    let mut theta: Vec<f64> = data
        .responses
        .iter()
        .map(|r| {
            let (raw, max, _) = raw_and_max(r, &data.categories, &core.items);
            initial_theta(raw, max)
        })
        .collect();
    let mut delta: Vec<Vec<f64>> = data
        .categories
        .iter()
        .map(|&c| vec![0.0; usize::from(c) - 1])
        .collect();
    let core_items: Vec<usize> = (0..data.items()).filter(|&j| core.items[j]).collect();

    let mut iterations = 0;
    let mut max_change = f64::INFINITY;
    while iterations < options.max_iter && max_change >= options.tol {
        iterations += 1;
        max_change = 0.0;
        for (n, row) in data.responses.iter().enumerate() {
            if !core.persons[n] {
                continue;
            }
            let (mut expected, mut info) = (0.0, 0.0);
            for &j in &core_items {
                if row[j].is_some() {
                    let (e, var) = item_moments(theta[n], &delta[j]);
                    expected += e;
                    info += var;
                }
            }
            let step = clamp_step((person_targets[n] - expected) / info);
            theta[n] += step;
            max_change = max_change.max(step.abs());
        }
        for &j in &core_items {
            let thetas = data
                .responses
                .iter()
                .zip(&theta)
                .enumerate()
                .filter(|(n, (r, _))| core.persons[*n] && r[j].is_some())
                .map(|(_, (_, &t))| t);
            let moved = threshold_step(&mut delta[j], thetas, &step_targets[j]);
            max_change = max_change.max(moved);
        }
        let shift =
            core_items.iter().map(|&j| mean(&delta[j])).sum::<f64>() / core_items.len() as f64;
        core_items
            .iter()
            .for_each(|&j| delta[j].iter_mut().for_each(|v| *v -= shift));
        theta.iter_mut().for_each(|v| *v -= shift);
    }

    Ok(finish(
        data,
        &core,
        RaschModel::PartialCredit,
        theta,
        delta,
        iterations,
        max_change,
        options.tol,
    ))
}

/// Anchors extreme items against the core persons, re-centres the item
/// difficulties, then measures extreme persons against all items.
#[allow(clippy::too_many_arguments)]
fn finish(
    data: &ResponseMatrix,
    core: &Core,
    model: RaschModel,
    mut theta: Vec<f64>,
    mut thresholds: Vec<Vec<f64>>,
    iterations: usize,
    max_change: f64,
    tol: f64,
) -> RaschFit {
    for j in (0..data.items()).filter(|&j| !core.items[j]) {
        let (counts, observed) = step_counts(data, j, &core.persons);
        if observed == 0.0 {
            continue;
        }
        let targets = clamp_counts(&counts, observed);
        for _ in 0..500 {
            let thetas = data
                .responses
                .iter()
                .zip(&theta)
                .enumerate()
                .filter(|(n, (r, _))| core.persons[*n] && r[j].is_some())
                .map(|(_, (_, &t))| t);
            if threshold_step(&mut thresholds[j], thetas, &targets) < 1e-12 {
                break;
            }
        }
    }
    let difficulties: Vec<f64> = thresholds.iter().map(|d| mean(d)).collect();
    let shift = mean(&difficulties);
    thresholds.iter_mut().flatten().for_each(|v| *v -= shift);
    theta.iter_mut().for_each(|v| *v -= shift);

    let all_items = vec![true; data.items()];
    let mut raw_scores = Vec::with_capacity(data.persons());
    let mut extreme = Vec::with_capacity(data.persons());
    for (n, row) in data.responses.iter().enumerate() {
        let (raw, max, _) = raw_and_max(row, &data.categories, &all_items);
        raw_scores.push(raw);
        extreme.push(adjusted_target(raw, max).1);
        if !core.persons[n] {
            theta[n] = person_measure(row, &thresholds);
        }
    }

    RaschFit {
        model,
        item_names: data.item_names.clone(),
        item_difficulties: thresholds.iter().map(|d| mean(d)).collect(),
        thresholds,
        person_measures: theta,
        person_raw_scores: raw_scores,
        person_extreme: extreme,
        converged: max_change < tol,
        iterations,
        max_change,
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Maximum-likelihood measure for one answered row with items fixed.
fn person_measure(row: &[Option<u8>], thresholds: &[Vec<f64>]) -> f64 {
    let mut raw = 0.0;
    let mut max = 0.0;
    for (v, d) in row.iter().zip(thresholds) {
        if let Some(v) = v {
            raw += f64::from(*v);
            max += d.len() as f64;
        }
    }
    let (target, _) = adjusted_target(raw, max);
    let mut theta = (target / (max - target)).ln();
    for _ in 0..500 {
        let (mut expected, mut info) = (0.0, 0.0);
        for (v, d) in row.iter().zip(thresholds) {
            if v.is_some() {
                let (e, var) = item_moments(theta, d);
                expected += e;
                info += var;
            }
        }
        let step = clamp_step((target - expected) / info);
        theta += step;
        if step.abs() < 1e-12 {
            break;
        }
    }
    theta
}

/// Maximum-likelihood measure per person with the fitted item parameters
/// held fixed. `responses` must use the fitted item order.
pub fn score_persons(fit: &RaschFit, responses: &[Vec<Option<u8>>]) -> Result<Vec<f64>> {
    let k = fit.thresholds.len();
    for (n, row) in responses.iter().enumerate() {
        if row.len() != k {
            return Err(Error::LengthMismatch {
                what: "response row vs fitted items",
                left: row.len(),
                right: k,
            });
        }
        if row.iter().all(Option::is_none) {
            return Err(Error::InvalidParameter(format!(
                "person {n} has no responses"
            )));
        }
        for (j, v) in row.iter().enumerate() {
            if let Some(v) = v {
                let steps = fit.thresholds[j].len();
                if usize::from(*v) > steps {
                    return Err(Error::InvalidParameter(format!(
                        "person {n}, item {j}: response {v} outside 0..={steps}"
                    )));
                }
            }
        }
    }
    Ok(responses
        .par_iter()
        .map(|row| person_measure(row, &fit.thresholds))
        .collect())
}

/// `alpha = K / (K - 1) * (1 - sum item variances / total-score variance)`
/// with sample (n - 1) variances.
pub fn cronbach_alpha(data: &ResponseMatrix) -> Result<f64> {
    let k = data.items();
    let n = data.persons();
    if k < 2 || n < 2 {
        return Err(Error::InvalidParameter(
            "alpha needs at least 2 items and 2 persons".into(),
        ));
    }
    if !data.is_complete() {
        return Err(Error::InvalidParameter(
            "alpha needs complete responses".into(),
        ));
    }
    let value = |n: usize, j: usize| f64::from(data.responses[n][j].expect("complete"));
    let sample_var = |xs: &[f64]| {
        let m = mean(xs);
        xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
    };
    let item_var_sum: f64 = (0..k)
        .map(|j| sample_var(&(0..n).map(|p| value(p, j)).collect::<Vec<_>>()))
        .sum();
    let totals: Vec<f64> = (0..n).map(|p| (0..k).map(|j| value(p, j)).sum()).collect();
    let total_var = sample_var(&totals);
    if total_var <= 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok(k as f64 / (k - 1) as f64 * (1.0 - item_var_sum / total_var))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::Rng;
    use proptest::prelude::*;

    fn complete(rows: &[&[u8]]) -> ResponseMatrix {
        ResponseMatrix::from_responses(
            rows.iter()
                .map(|r| r.iter().map(|&v| Some(v)).collect())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn pcm_examples() {
        let p = pcm_probability(0.0, &[0.0, 0.0]);
        for v in p {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        let (theta, d) = (0.7, -0.4);
        let p = pcm_probability(theta, &[d]);
        assert!((p[1] - crate::numkit::sigmoid(theta - d)).abs() < 1e-15);
        let p = pcm_probability(1.3, &[1.3]);
        assert!((p[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn alpha_examples() {
        // item variances 0.5 each, total variance 2: 2 * (1 - 1/2)
        let a = cronbach_alpha(&complete(&[&[0, 0], &[1, 1]])).unwrap();
        assert!((a - 1.0).abs() < 1e-15);
        let a =
            cronbach_alpha(&complete(&[&[0, 0, 0], &[1, 1, 1], &[1, 1, 1], &[0, 0, 0]])).unwrap();
        assert!((a - 1.0).abs() < 1e-15);
        assert!(matches!(
            cronbach_alpha(&complete(&[&[1, 0], &[0, 1]])),
            Err(Error::ZeroVariance)
        ));
    }

    #[test]
    fn alpha_near_zero_for_independent_items() {
        let mut rng = Rng::new(77);
        let rows: Vec<Vec<Option<u8>>> = (0..10_000)
            .map(|_| (0..5).map(|_| Some(u8::from(rng.bernoulli(0.5)))).collect())
            .collect();
        let a = cronbach_alpha(&ResponseMatrix::from_responses(rows).unwrap()).unwrap();
        assert!(a.abs() < 0.1, "alpha {a}");
    }

    #[test]
    fn alpha_rejects_missing() {
        let m = ResponseMatrix::from_responses(vec![vec![Some(0), None], vec![Some(1), Some(1)]])
            .unwrap();
        assert!(cronbach_alpha(&m).is_err());
    }

    fn simulated(seed: u64, persons: usize, difficulties: &[f64]) -> (ResponseMatrix, Vec<f64>) {
        let mut rng = Rng::new(seed);
        let thetas: Vec<f64> = (0..persons).map(|_| rng.normal()).collect();
        let thresholds: Vec<Vec<f64>> = difficulties.iter().map(|&d| vec![d]).collect();
        let rows = simulate_responses(&thetas, &thresholds, &mut rng);
        (ResponseMatrix::from_responses(rows).unwrap(), thetas)
    }

    #[test]
    fn identical_patterns_get_identical_measures() {
        let (m, _) = simulated(3, 200, &[-1.0, -0.5, 0.0, 0.5, 1.0]);
        let fit = fit_rasch(&m, &FitOptions::default()).unwrap();
        assert!(fit.converged, "{} {}", fit.iterations, fit.max_change);
        for a in 0..m.persons() {
            for b in 0..a {
                if m.responses()[a] == m.responses()[b] {
                    assert_eq!(fit.person_measures[a], fit.person_measures[b]);
                }
            }
        }
        assert!(fit.item_difficulties.iter().sum::<f64>().abs() < 1e-6);
    }

    #[test]
    fn permuting_items_permutes_difficulties() {
        let (m, _) = simulated(4, 300, &[-1.5, 0.0, 0.4, 1.2]);
        let fit = fit_rasch(&m, &FitOptions::default()).unwrap();
        let order = [2, 0, 3, 1];
        let fit2 = fit_rasch(&m.select_items(&order), &FitOptions::default()).unwrap();
        for (pos, &j) in order.iter().enumerate() {
            assert!((fit2.item_difficulties[pos] - fit.item_difficulties[j]).abs() < 1e-6);
        }
        for (a, b) in fit.person_measures.iter().zip(&fit2.person_measures) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn score_equations_hold_at_convergence() {
        let mut rng = Rng::new(12);
        let thetas: Vec<f64> = (0..250).map(|_| rng.gaussian(0.0, 1.2)).collect();
        let thresholds = vec![vec![-1.0, 0.0, 1.0], vec![-0.5, 0.5], vec![0.2], vec![0.8]];
        let rows = simulate_responses(&thetas, &thresholds, &mut rng);
        let m = ResponseMatrix::new(
            (1..=4).map(|j| format!("s{j}")).collect(),
            vec![4, 3, 2, 2],
            rows,
        )
        .unwrap();
        let fit = fit_rasch(
            &m,
            &FitOptions {
                max_iter: 2000,
                tol: 1e-10,
            },
        )
        .unwrap();
        assert_eq!(fit.model, RaschModel::PartialCredit);
        assert!(fit.converged, "{} {}", fit.iterations, fit.max_change);
        for (n, row) in m.responses().iter().enumerate() {
            let expected: f64 = row
                .iter()
                .enumerate()
                .map(|(j, _)| item_moments(fit.person_measures[n], &fit.thresholds[j]).0)
                .sum();
            let max: f64 = m.categories().iter().map(|&c| f64::from(c - 1)).sum();
            let (target, _) = adjusted_target(fit.person_raw_scores[n], max);
            assert!((expected - target).abs() < 1e-6);
        }
        for j in 0..4 {
            for s in 1..m.categories()[j] {
                // item equations are taken over the non-extreme persons
                let core = |n: &usize| !fit.person_extreme[*n];
                let observed = (0..m.persons())
                    .filter(core)
                    .filter(|&n| m.responses()[n][j].unwrap() >= s)
                    .count() as f64;
                let expected: f64 = (0..m.persons())
                    .filter(core)
                    .map(|n| {
                        let p = pcm_probability(fit.person_measures[n], &fit.thresholds[j]);
                        p[usize::from(s)..].iter().sum::<f64>()
                    })
                    .sum();
                assert!((expected - observed).abs() < 1e-6);
            }
        }
        assert!(fit.item_difficulties.iter().sum::<f64>().abs() < 1e-9);
    }

    #[test]
    fn extreme_persons_and_items_get_finite_measures() {
        let (m, _) = simulated(5, 120, &[-1.0, 0.0, 1.0, 0.5]);
        let mut rows = m.responses().to_vec();
        // item 4 answered correctly by everyone, person 1 scores zero elsewhere
        rows.iter_mut().for_each(|r| r.push(Some(1)));
        rows[0] = vec![Some(0), Some(0), Some(0), Some(0), Some(0)];
        let m = ResponseMatrix::from_responses(rows).unwrap();
        let fit = fit_rasch(&m, &FitOptions::default()).unwrap();
        assert!(fit.converged);
        assert!(fit.person_measures.iter().all(|t| t.is_finite()));
        assert!(fit.thresholds.iter().flatten().all(|d| d.is_finite()));
        let lowest = fit
            .person_measures
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        assert_eq!(fit.person_measures[0], lowest);
        assert!(fit.person_extreme[0]);
        let easiest = fit
            .item_difficulties
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        assert_eq!(fit.item_difficulties[4], easiest);
        assert!(fit.item_difficulties.iter().sum::<f64>().abs() < 1e-9);
    }

    #[test]
    fn scoring_is_monotone_in_raw_score() {
        let fit = RaschFit {
            model: RaschModel::Dichotomous,
            item_names: vec![],
            thresholds: [-1.5, -0.5, 0.5, 1.5].iter().map(|&d| vec![d]).collect(),
            item_difficulties: vec![-1.5, -0.5, 0.5, 1.5],
            person_measures: vec![],
            person_raw_scores: vec![],
            person_extreme: vec![],
            converged: true,
            iterations: 0,
            max_change: 0.0,
        };
        let rows: Vec<Vec<Option<u8>>> = (0..=4)
            .map(|r| (0..4).map(|j| Some(u8::from(j < r))).collect())
            .collect();
        let thetas = score_persons(&fit, &rows).unwrap();
        for w in thetas.windows(2) {
            assert!(w[0] < w[1]);
        }
        assert!(thetas[2].abs() < 1e-9, "middle score on symmetric items");
        assert!(thetas.iter().all(|t| t.is_finite()));
        assert!(score_persons(&fit, &[vec![None; 4]]).is_err());
    }

    #[test]
    fn read_csv_with_offset() {
        let text = "q1,q2,q3\n1,2,4\n2,,1\n";
        let m = ResponseMatrix::read_csv(text.as_bytes(), 1).unwrap();
        assert_eq!(m.item_names(), ["q1", "q2", "q3"]);
        assert_eq!(m.responses()[0], vec![Some(0), Some(1), Some(3)]);
        assert_eq!(m.responses()[1], vec![Some(1), None, Some(0)]);
        assert_eq!(m.categories(), [2, 2, 4]);
        assert!(matches!(
            ResponseMatrix::read_csv("a,b\n0,x\n".as_bytes(), 0),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(ResponseMatrix::read_csv("a,b\n0,1\n".as_bytes(), 1).is_err());
    }

    proptest! {
        #[test]
        fn pcm_sums_to_one(theta in -6.0f64..6.0, d in proptest::collection::vec(-4.0f64..4.0, 1..5)) {
            let p = pcm_probability(theta, &d);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn location_invariance(theta in -3.0f64..3.0, c in -2.0f64..2.0,
                               d in proptest::collection::vec(-3.0f64..3.0, 1..4)) {
            let shifted: Vec<f64> = d.iter().map(|v| v + c).collect();
            let a = pcm_probability(theta, &d);
            let b = pcm_probability(theta + c, &shifted);
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }
}
