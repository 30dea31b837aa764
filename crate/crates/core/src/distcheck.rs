//! Real-versus-synthetic fidelity: per-feature summary statistics, two-sample
//! Kolmogorov-Smirnov distances, binary proportion gaps and shared-edge
//! histograms, overall and per label.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::table::{FeatureKind, FeatureSchema, LabeledTable};

pub const DEFAULT_BINS: usize = 30;

/// Sup-norm distance between the empirical CDFs of `a` and `b`.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyInput(
            "KS statistic needs two non-empty samples",
        ));
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(Error::InvalidParameter("KS statistic on NaN".into()));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        // step past every copy of the smaller value in both samples
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleSummary {
    pub n: usize,
    pub mean: Option<f64>,
    /// Population standard deviation.
    pub sd: Option<f64>,
}

fn summarize(values: &[f64]) -> SampleSummary {
    if values.is_empty() {
        return SampleSummary {
            n: 0,
            mean: None,
            sd: None,
        };
    }
    // sorted so the result does not depend on row order
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    SampleSummary {
        n: v.len(),
        mean: Some(mean),
        sd: Some(var.sqrt()),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Comparison {
    Continuous {
        real: SampleSummary,
        synth: SampleSummary,
        /// `None` when either side has no observed values.
        ks: Option<f64>,
    },
    Binary {
        real_n: usize,
        synth_n: usize,
        real_proportion: Option<f64>,
        synth_proportion: Option<f64>,
        gap: Option<f64>,
    },
}

fn proportion(values: &[f64]) -> Option<f64> {
    (!values.is_empty())
        .then(|| values.iter().filter(|&&v| v == 1.0).count() as f64 / values.len() as f64)
}

fn compare_values(kind: FeatureKind, real: &[f64], synth: &[f64]) -> Comparison {
    match kind {
        FeatureKind::Continuous => Comparison::Continuous {
            real: summarize(real),
            synth: summarize(synth),
            ks: ks_statistic(real, synth).ok(),
        },
        FeatureKind::Binary => {
            let (rp, sp) = (proportion(real), proportion(synth));
            Comparison::Binary {
                real_n: real.len(),
                synth_n: synth.len(),
                real_proportion: rp,
                synth_proportion: sp,
                gap: rp.zip(sp).map(|(a, b)| (a - b).abs()),
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `all`, `label0` or `label1`.
    pub group: String,
    /// `bins + 1` shared edges spanning both sources.
    pub edges: Vec<f64>,
    pub real_counts: Vec<u64>,
    pub synth_counts: Vec<u64>,
}

fn histogram(group: &str, real: &[f64], synth: &[f64], bins: usize) -> Histogram {
    let all = real.iter().chain(synth);
    let lo = all.clone().copied().fold(f64::INFINITY, f64::min);
    let hi = all.copied().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if !lo.is_finite() {
        (0.0, 1.0)
    } else if lo == hi {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    };
    let width = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins)
        .map(|i| if i == bins { hi } else { lo + width * i as f64 })
        .collect();
    let count = |values: &[f64]| {
        let mut counts = vec![0u64; bins];
        for &v in values {
            let b = (((v - lo) / width).floor() as usize).min(bins - 1);
            counts[b] += 1;
        }
        counts
    };
    Histogram {
        group: group.to_string(),
        real_counts: count(real),
        synth_counts: count(synth),
        edges,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureFidelity {
    pub name: String,
    pub kind: FeatureKind,
    pub overall: Comparison,
    pub label0: Comparison,
    pub label1: Comparison,
    pub histograms: Vec<Histogram>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SexBalance {
    pub real_female_fraction: Option<f64>,
    pub synth_female_fraction: Option<f64>,
    pub gap: Option<f64>,
    /// Female fraction among synthetic rows of label 0 and label 1.
    pub synth_female_fraction_by_label: [Option<f64>; 2],
    pub real_female_fraction_by_label: [Option<f64>; 2],
    /// Whether synthetic label-1 rows are more often female than label-0
    /// rows.
    pub synth_female_skew_learned: Option<bool>,
    /// Fraction of rows where `Female` equals `sex`.
    pub real_female_sex_agreement: Option<f64>,
    pub synth_female_sex_agreement: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub real_rows: usize,
    pub synth_rows: usize,
    pub bins: usize,
    pub features: Vec<FeatureFidelity>,
    /// Present when the tables carry a `sex` column.
    pub sex: Option<SexBalance>,
}

fn observed(table: &LabeledTable, j: usize, label: Option<u8>) -> Vec<f64> {
    table
        .rows()
        .iter()
        .zip(table.labels())
        .filter(|(_, &l)| label.is_none_or(|want| want == l))
        .filter_map(|(r, _)| r[j])
        .collect()
}

fn sex_balance(real: &LabeledTable, synth: &LabeledTable) -> Option<SexBalance> {
    let sex = real.feature_index("sex")?;
    let frac = |t: &LabeledTable, label| proportion(&observed(t, sex, label));
    let agreement = |t: &LabeledTable| {
        let female = t.feature_index("Female")?;
        let pairs: Vec<bool> = t
            .rows()
            .iter()
            .filter_map(|r| r[sex].zip(r[female]).map(|(a, b)| a == b))
            .collect();
        (!pairs.is_empty())
            .then(|| pairs.iter().filter(|&&x| x).count() as f64 / pairs.len() as f64)
    };
    let (rf, sf) = (frac(real, None), frac(synth, None));
    let synth_by_label = [frac(synth, Some(0)), frac(synth, Some(1))];
    Some(SexBalance {
        real_female_fraction: rf,
        synth_female_fraction: sf,
        gap: rf.zip(sf).map(|(a, b)| (a - b).abs()),
        synth_female_fraction_by_label: synth_by_label,
        real_female_fraction_by_label: [frac(real, Some(0)), frac(real, Some(1))],
        synth_female_skew_learned: synth_by_label[0].zip(synth_by_label[1]).map(|(a, b)| b > a),
        real_female_sex_agreement: agreement(real),
        synth_female_sex_agreement: agreement(synth),
    })
}

/// Compares every feature of `synth` against `real`. Feature kinds are
/// inferred from the real table.
pub fn compare(real: &LabeledTable, synth: &LabeledTable, bins: usize) -> Result<FidelityReport> {
    if real.feature_names() != synth.feature_names() {
        return Err(Error::Schema(format!(
            "feature columns differ: {:?} vs {:?}",
            real.feature_names(),
            synth.feature_names()
        )));
    }
    if bins == 0 {
        return Err(Error::InvalidParameter(
            "histograms need at least one bin".into(),
        ));
    }
    let schema = FeatureSchema::infer(real)?;
    let features = (0..real.n_features())
        .map(|j| {
            let kind = schema.kind(j);
            let groups = [("all", None), ("label0", Some(0)), ("label1", Some(1))];
            let mut comparisons = Vec::with_capacity(3);
            let mut histograms = Vec::with_capacity(3);
            for (group, label) in groups {
                let (r, s) = (observed(real, j, label), observed(synth, j, label));
                comparisons.push(compare_values(kind, &r, &s));
                histograms.push(histogram(group, &r, &s, bins));
            }
            let [overall, label0, label1]: [Comparison; 3] =
                comparisons.try_into().expect("three groups");
            FeatureFidelity {
                name: real.feature_names()[j].clone(),
                kind,
                overall,
                label0,
                label1,
                histograms,
            }
        })
        .collect();
    Ok(FidelityReport {
        real_rows: real.len(),
        synth_rows: synth.len(),
        bins,
        features,
        sex: sex_balance(real, synth),
    })
}

impl FidelityReport {
    /// `feature,source,bin_left,bin_right,count`, where `source` is `real` or
    /// `synth`, suffixed with `_label0`/`_label1` for the per-label bins.
    pub fn write_histogram_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "feature,source,bin_left,bin_right,count")?;
        for f in &self.features {
            for h in &f.histograms {
                let suffix = if h.group == "all" {
                    String::new()
                } else {
                    format!("_{}", h.group)
                };
                for (source, counts) in [("real", &h.real_counts), ("synth", &h.synth_counts)] {
                    for (b, c) in counts.iter().enumerate() {
                        writeln!(
                            out,
                            "{},{source}{suffix},{},{},{c}",
                            f.name,
                            h.edges[b],
                            h.edges[b + 1]
                        )?;
                    }
                }
            }
        }
        Ok(())
    }
}
