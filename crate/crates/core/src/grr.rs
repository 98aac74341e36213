//! Gage repeatability & reproducibility by two-way crossed ANOVA.
//!
//! Spreads are reported as six standard deviations. Variance components
//! that come out negative are clamped to zero.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Width of the reported spread in standard deviations.
pub const SPREAD_SIGMAS: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Unit {
    #[default]
    Um,
    Mm,
    Px,
}

/// Complete parts × operators × trials grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrrMeasurementSet {
    parts: usize,
    operators: usize,
    trials: usize,
    values: Vec<f64>,
    pub unit: Unit,
}

/// One row of a long-format measurement table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrrRecord {
    pub part: String,
    pub operator: String,
    pub trial: String,
    pub value: f64,
}

impl GrrMeasurementSet {
    pub fn new(parts: usize, operators: usize, trials: usize, values: Vec<f64>, unit: Unit) -> Result<Self> {
        if parts == 0 || operators == 0 || trials == 0 {
            return Err(Error::IncompleteGrid(format!(
                "counts must be positive, got {parts}x{operators}x{trials}"
            )));
        }
        if values.len() != parts * operators * trials {
            return Err(Error::IncompleteGrid(format!(
                "{parts}x{operators}x{trials} grid needs {} values, got {}",
                parts * operators * trials,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::IncompleteGrid("non-finite measurement".into()));
        }
        Ok(Self {
            parts,
            operators,
            trials,
            values,
            unit,
        })
    }

    /// Builds a grid from long-format records. Labels are ordered
    /// lexicographically; every (part, operator, trial) cell must appear once.
    pub fn from_records(records: &[GrrRecord], unit: Unit) -> Result<Self> {
        let index = |f: fn(&GrrRecord) -> &str| -> BTreeMap<&str, usize> {
            let mut m: BTreeMap<&str, usize> = records.iter().map(|r| (f(r), 0)).collect();
            m.values_mut().enumerate().for_each(|(i, v)| *v = i);
            m
        };
        let parts = index(|r| &r.part);
        let ops = index(|r| &r.operator);
        let trials = index(|r| &r.trial);
        let (p, o, t) = (parts.len(), ops.len(), trials.len());
        let mut cells = vec![None; p * o * t];
        for r in records {
            let i = (parts[r.part.as_str()] * o + ops[r.operator.as_str()]) * t + trials[r.trial.as_str()];
            if cells[i].replace(r.value).is_some() {
                return Err(Error::IncompleteGrid(format!(
                    "duplicate cell part={} operator={} trial={}",
                    r.part, r.operator, r.trial
                )));
            }
        }
        let values = cells.into_iter().collect::<Option<Vec<f64>>>().ok_or_else(|| {
            Error::IncompleteGrid(format!("{} records for a {p}x{o}x{t} grid", records.len()))
        })?;
        Self::new(p, o, t, values, unit)
    }

    pub fn to_records(&self) -> Vec<GrrRecord> {
        let mut out = Vec::with_capacity(self.values.len());
        for p in 0..self.parts {
            for o in 0..self.operators {
                for t in 0..self.trials {
                    out.push(GrrRecord {
                        part: (p + 1).to_string(),
                        operator: (o + 1).to_string(),
                        trial: (t + 1).to_string(),
                        value: self.get(p, o, t),
                    });
                }
            }
        }
        out
    }

    pub fn parts(&self) -> usize {
        self.parts
    }

    pub fn operators(&self) -> usize {
        self.operators
    }

    pub fn trials(&self) -> usize {
        self.trials
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, part: usize, operator: usize, trial: usize) -> f64 {
        self.values[(part * self.operators + operator) * self.trials + trial]
    }

    /// Same grid with `offset` added to every value.
    pub fn shifted(&self, offset: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v + offset).collect(),
            ..self.clone()
        }
    }

    /// Same grid with every value multiplied by `factor`.
    pub fn scaled(&self, factor: f64, unit: Unit) -> Self {
        Self {
            values: self.values.iter().map(|v| v * factor).collect(),
            unit,
            ..self.clone()
        }
    }
}

/// Sums of squares, degrees of freedom and mean squares.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnovaTable {
    pub ss_part: f64,
    pub ss_operator: f64,
    pub ss_interaction: f64,
    pub ss_error: f64,
    pub df_part: usize,
    pub df_operator: usize,
    pub df_interaction: usize,
    pub df_error: usize,
}

impl AnovaTable {
    fn ms(ss: f64, df: usize) -> f64 {
        if df == 0 {
            0.0
        } else {
            ss / df as f64
        }
    }

    pub fn ms_part(&self) -> f64 {
        Self::ms(self.ss_part, self.df_part)
    }

    pub fn ms_operator(&self) -> f64 {
        Self::ms(self.ss_operator, self.df_operator)
    }

    pub fn ms_interaction(&self) -> f64 {
        Self::ms(self.ss_interaction, self.df_interaction)
    }

    pub fn ms_error(&self) -> f64 {
        Self::ms(self.ss_error, self.df_error)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrrResult {
    pub repeatability_ev: f64,
    pub reproducibility_av: f64,
    pub part_variation_pv: f64,
    pub total_rr: f64,
    pub total_variation: f64,
    pub percent_rr: f64,
    pub var_repeatability: f64,
    pub var_operator: f64,
    pub var_interaction: f64,
    pub var_part: f64,
    pub anova: AnovaTable,
    pub unit: Unit,
}

/// Computes the crossed ANOVA table (interaction only when both factors
/// have more than one level).
pub fn anova_table(data: &GrrMeasurementSet) -> AnovaTable {
    let (p, o, r) = (data.parts, data.operators, data.trials);
    let n = (p * o * r) as f64;
    let grand = data.values.iter().sum::<f64>() / n;

    let mut cell = vec![0.0; p * o];
    let mut part_mean = vec![0.0; p];
    let mut op_mean = vec![0.0; o];
    for i in 0..p {
        for j in 0..o {
            let s: f64 = (0..r).map(|k| data.get(i, j, k)).sum();
            cell[i * o + j] = s / r as f64;
            part_mean[i] += s;
            op_mean[j] += s;
        }
    }
    part_mean.iter_mut().for_each(|m| *m /= (o * r) as f64);
    op_mean.iter_mut().for_each(|m| *m /= (p * r) as f64);

    let ss_part = (o * r) as f64 * part_mean.iter().map(|m| (m - grand).powi(2)).sum::<f64>();
    let ss_operator = (p * r) as f64 * op_mean.iter().map(|m| (m - grand).powi(2)).sum::<f64>();
    let mut ss_cells_int = 0.0;
    let mut ss_within = 0.0;
    for i in 0..p {
        for j in 0..o {
            let c = cell[i * o + j];
            ss_cells_int += (c - part_mean[i] - op_mean[j] + grand).powi(2);
            ss_within += (0..r).map(|k| (data.get(i, j, k) - c).powi(2)).sum::<f64>();
        }
    }
    let ss_interaction = r as f64 * ss_cells_int;

    let with_interaction = p > 1 && o > 1;
    let (ss_interaction, df_interaction, ss_error, df_error) = if with_interaction {
        (ss_interaction, (p - 1) * (o - 1), ss_within, p * o * (r - 1))
    } else {
        // With a single level the interaction is identically zero.
        (0.0, 0, ss_within, p * o * (r - 1))
    };
    AnovaTable {
        ss_part,
        ss_operator,
        ss_interaction,
        ss_error,
        df_part: p - 1,
        df_operator: o - 1,
        df_interaction,
        df_error,
    }
}

pub fn grr_study(data: &GrrMeasurementSet) -> Result<GrrResult> {
    if data.trials < 2 {
        return Err(Error::InsufficientTrials(data.trials));
    }
    let (p, o, r) = (data.parts as f64, data.operators as f64, data.trials as f64);
    let t = anova_table(data);
    let ms_e = t.ms_error();
    let with_interaction = t.df_interaction > 0;
    // Error term against which the main effects are tested.
    let ms_ref = if with_interaction {
        t.ms_interaction()
    } else {
        ms_e
    };

    let var_repeatability = ms_e;
    let var_interaction = if with_interaction {
        ((t.ms_interaction() - ms_e) / r).max(0.0)
    } else {
        0.0
    };
    let var_operator = if data.operators > 1 {
        ((t.ms_operator() - ms_ref) / (p * r)).max(0.0)
    } else {
        0.0
    };
    let var_part = if data.parts > 1 {
        ((t.ms_part() - ms_ref) / (o * r)).max(0.0)
    } else {
        0.0
    };

    let repeatability_ev = SPREAD_SIGMAS * var_repeatability.sqrt();
    let reproducibility_av = SPREAD_SIGMAS * (var_operator + var_interaction).sqrt();
    let part_variation_pv = SPREAD_SIGMAS * var_part.sqrt();
    let total_rr = repeatability_ev.hypot(reproducibility_av);
    let total_variation = total_rr.hypot(part_variation_pv);
    let percent_rr = if total_variation > 0.0 {
        100.0 * total_rr / total_variation
    } else {
        0.0
    };
    Ok(GrrResult {
        repeatability_ev,
        reproducibility_av,
        part_variation_pv,
        total_rr,
        total_variation,
        percent_rr,
        var_repeatability,
        var_operator,
        var_interaction,
        var_part,
        anova: t,
        unit: data.unit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_measurements() {
        let d = GrrMeasurementSet::new(3, 2, 3, vec![7.5; 18], Unit::Um).unwrap();
        let g = grr_study(&d).unwrap();
        assert_eq!(g.repeatability_ev, 0.0);
        assert_eq!(g.reproducibility_av, 0.0);
        assert_eq!(g.total_rr, 0.0);
        assert_eq!(g.percent_rr, 0.0);
    }

    #[test]
    fn single_trial_rejected() {
        let d = GrrMeasurementSet::new(2, 2, 1, vec![1.0; 4], Unit::Um).unwrap();
        assert_eq!(grr_study(&d), Err(Error::InsufficientTrials(1)));
    }

    #[test]
    fn single_operator_has_no_reproducibility() {
        let d = GrrMeasurementSet::new(2, 1, 2, vec![1.0, 1.2, 3.0, 2.7], Unit::Um).unwrap();
        let g = grr_study(&d).unwrap();
        assert_eq!(g.reproducibility_av, 0.0);
        assert!(g.repeatability_ev > 0.0);
    }

    #[test]
    fn records_round_trip_and_incomplete() {
        let d = GrrMeasurementSet::new(2, 2, 2, (0..8).map(f64::from).collect(), Unit::Mm).unwrap();
        let back = GrrMeasurementSet::from_records(&d.to_records(), Unit::Mm).unwrap();
        assert_eq!(back, d);
        let mut recs = d.to_records();
        recs.pop();
        assert!(matches!(
            GrrMeasurementSet::from_records(&recs, Unit::Mm),
            Err(Error::IncompleteGrid(_))
        ));
    }
}
