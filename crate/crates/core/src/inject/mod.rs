//! Seeded error injection into a clean table with a ground-truth mask.

mod io;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::detect::FdRule;
use crate::error::{Error, Result};
use crate::seed;
use crate::table::{Cell, CellKey, CellRef, ColumnKind, Dataset};

pub use io::{read_mask, read_mask_file, write_mask, write_mask_file};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ErrorType {
    #[serde(rename = "MV")]
    MissingValue,
    #[serde(rename = "OT")]
    Outlier,
    #[serde(rename = "TP")]
    Typo,
    #[serde(rename = "RV")]
    RuleViolation,
}

impl ErrorType {
    pub const ALL: [ErrorType; 4] = [
        ErrorType::MissingValue,
        ErrorType::Outlier,
        ErrorType::Typo,
        ErrorType::RuleViolation,
    ];

    pub fn code(self) -> &'static str {
        match self {
            ErrorType::MissingValue => "MV",
            ErrorType::Outlier => "OT",
            ErrorType::Typo => "TP",
            ErrorType::RuleViolation => "RV",
        }
    }
}

impl fmt::Display for ErrorType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for ErrorType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ErrorType::ALL
            .into_iter()
            .find(|t| t.code().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Config(format!("unknown error type '{s}' (expected MV, OT, TP or RV)")))
    }
}

/// Corrupted cells with their type and pre-injection value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ErrorMask {
    pub entries: BTreeMap<CellRef, (ErrorType, Cell)>,
}

impl ErrorMask {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn cells(&self) -> BTreeSet<CellRef> {
        self.entries.keys().copied().collect()
    }

    pub fn count(&self, ty: ErrorType) -> usize {
        self.entries.values().filter(|(t, _)| *t == ty).count()
    }

    /// Entries restricted to the given rows, renumbered by position in `rows`.
    pub fn select_rows(&self, rows: &[usize]) -> ErrorMask {
        let position: BTreeMap<usize, usize> =
            rows.iter().enumerate().map(|(i, &r)| (r, i)).collect();
        let entries = self
            .entries
            .iter()
            .filter_map(|(at, v)| {
                position
                    .get(&at.row)
                    .map(|&row| (CellRef::new(row, at.col), v.clone()))
            })
            .collect();
        ErrorMask { entries }
    }
}

/// Relative weights of each error type; must sum to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TypeMix {
    pub mv: f64,
    pub ot: f64,
    pub tp: f64,
    pub rv: f64,
}

impl Default for TypeMix {
    fn default() -> Self {
        TypeMix::uniform(&[ErrorType::MissingValue, ErrorType::Outlier])
    }
}

impl TypeMix {
    /// Equal weight on each listed type.
    pub fn uniform(types: &[ErrorType]) -> Self {
        let set: BTreeSet<_> = types.iter().copied().collect();
        let w = if set.is_empty() { 0.0 } else { 1.0 / set.len() as f64 };
        let pick = |t| if set.contains(&t) { w } else { 0.0 };
        TypeMix {
            mv: pick(ErrorType::MissingValue),
            ot: pick(ErrorType::Outlier),
            tp: pick(ErrorType::Typo),
            rv: pick(ErrorType::RuleViolation),
        }
    }

    pub fn weight(&self, ty: ErrorType) -> f64 {
        match ty {
            ErrorType::MissingValue => self.mv,
            ErrorType::Outlier => self.ot,
            ErrorType::Typo => self.tp,
            ErrorType::RuleViolation => self.rv,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let weights = ErrorType::ALL.map(|t| self.weight(t));
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Plan("type_mix weights must be non-negative".into()));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Plan(format!("type_mix weights sum to {sum}, expected 1")));
        }
        Ok(())
    }

    /// Splits `total` across types by the largest-remainder method, ties
    /// going to the earlier type in `ErrorType::ALL`.
    pub fn apportion(&self, total: usize) -> BTreeMap<ErrorType, usize> {
        let quotas: Vec<(ErrorType, f64)> = ErrorType::ALL
            .iter()
            .map(|&t| (t, self.weight(t) * total as f64))
            .collect();
        let mut counts: BTreeMap<ErrorType, usize> =
            quotas.iter().map(|&(t, q)| (t, q.floor() as usize)).collect();
        let assigned: usize = counts.values().sum();
        let mut order: Vec<usize> = (0..quotas.len()).filter(|&i| quotas[i].1 > 0.0).collect();
        order.sort_by(|&a, &b| {
            let ra = quotas[a].1 - quotas[a].1.floor();
            let rb = quotas[b].1 - quotas[b].1.floor();
            rb.total_cmp(&ra).then(a.cmp(&b))
        });
        for &i in order.iter().take(total.saturating_sub(assigned)) {
            *counts.get_mut(&quotas[i].0).expect("every type present") += 1;
        }
        counts
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InjectionPlan {
    /// Fraction of non-label cells to corrupt.
    pub gamma: f64,
    pub type_mix: TypeMix,
    pub fd_rules: Vec<FdRule>,
    /// Outlier shift in standard deviations of the clean column.
    pub outlier_scale: f64,
    pub seed: u64,
}

impl Default for InjectionPlan {
    fn default() -> Self {
        InjectionPlan {
            gamma: 0.1,
            type_mix: TypeMix::default(),
            fd_rules: Vec::new(),
            outlier_scale: 5.0,
            seed: 0,
        }
    }
}

impl InjectionPlan {
    pub fn new(gamma: f64, type_mix: TypeMix, seed: u64) -> Self {
        InjectionPlan {
            gamma,
            type_mix,
            seed,
            ..InjectionPlan::default()
        }
    }

    /// Checks the plan on its own, without a table.
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::Plan(format!("gamma must lie in (0, 1), got {}", self.gamma)));
        }
        self.type_mix.validate()?;
        if self.type_mix.rv > 0.0 && self.fd_rules.is_empty() {
            return Err(Error::Plan(
                "rule-violation errors requested but no fd rules were given".into(),
            ));
        }
        if !(self.outlier_scale > 0.0 && self.outlier_scale.is_finite()) {
            return Err(Error::Plan("outlier_scale must be positive".into()));
        }
        Ok(())
    }

    /// Number of cells this plan corrupts in `ds`.
    pub fn target_count(&self, ds: &Dataset) -> usize {
        // The small slack keeps products like 0.29 * 100 from flooring to 28.
        (self.gamma * targetable_cells(ds) as f64 + 1e-9).floor() as usize
    }
}

/// Cells eligible for corruption: every cell outside the label column.
pub fn targetable_cells(ds: &Dataset) -> usize {
    ds.n_rows() * ds.feature_cols().count()
}

pub fn realized_rate(mask: &ErrorMask, ds: &Dataset) -> f64 {
    let n = targetable_cells(ds);
    if n == 0 {
        0.0
    } else {
        mask.len() as f64 / n as f64
    }
}

/// Corrupts `floor(gamma * targetable)` distinct non-label cells of `clean`.
pub fn inject(clean: &Dataset, plan: &InjectionPlan) -> Result<(Dataset, ErrorMask)> {
    plan.validate()?;
    if let Some(at) = clean.missing_cells().next() {
        return Err(Error::Plan(format!(
            "clean table has a missing cell at row {}, col {}",
            at.row, at.col
        )));
    }
    let total = plan.target_count(clean);
    if total == 0 {
        return Err(Error::Plan(format!(
            "gamma {} selects no cells out of {}",
            plan.gamma,
            targetable_cells(clean)
        )));
    }
    let ctx = Context::new(clean, plan)?;
    let counts = plan.type_mix.apportion(total);
    let mut rng = seed::rng(plan.seed);
    let mut taken: HashSet<CellRef> = HashSet::with_capacity(total);
    let mut dirty = clean.clone();
    let mut mask = ErrorMask::default();

    // Most constrained types first so the unconstrained ones cannot starve them.
    let order = [
        ErrorType::RuleViolation,
        ErrorType::Typo,
        ErrorType::Outlier,
        ErrorType::MissingValue,
    ];
    for ty in order {
        let need = counts[&ty];
        if need == 0 {
            continue;
        }
        let pool: Vec<CellRef> = ctx
            .compatible(ty)
            .into_iter()
            .filter(|c| !taken.contains(c))
            .collect();
        if pool.len() < need {
            return Err(Error::Plan(format!(
                "insufficient cells for {ty}: need {need}, {} compatible cells available (shortfall {})",
                pool.len(),
                need - pool.len()
            )));
        }
        let mut chosen: Vec<CellRef> = sample(&mut rng, pool.len(), need)
            .into_iter()
            .map(|i| pool[i])
            .collect();
        chosen.sort();
        for at in chosen {
            let original = clean.cell(at).clone();
            let corrupted = ctx.corrupt(ty, at, &original, &mut rng);
            dirty.set_cell(at, corrupted)?;
            taken.insert(at);
            mask.entries.insert(at, (ty, original));
        }
    }
    Ok((dirty, mask))
}

/// Writes every mask original back into `dirty`.
pub fn restore(dirty: &Dataset, mask: &ErrorMask) -> Result<Dataset> {
    let mut out = dirty.clone();
    for (&at, (_, original)) in &mask.entries {
        if at.row >= out.n_rows() || at.col >= out.n_cols() {
            return Err(Error::Shape {
                expected: out.n_cells(),
                got: at.row * out.n_cols() + at.col,
            });
        }
        out.set_cell(at, original.clone())?;
    }
    Ok(out)
}

const TYPO_ALPHABET: &[u8] = b"abcdefghijklmnopqrstuvwxyz0123456789";

/// Per-column statistics and rule structure of the clean table.
struct Context<'a> {
    clean: &'a Dataset,
    outlier_scale: f64,
    /// (mean, population std) of numeric columns with non-zero spread.
    moments: BTreeMap<usize, (f64, f64)>,
    vocab: BTreeMap<usize, Vec<Cell>>,
    /// Cells whose rhs value can be changed to break an lhs group of size ≥ 2.
    rv_cells: BTreeSet<CellRef>,
}

impl<'a> Context<'a> {
    fn new(clean: &'a Dataset, plan: &InjectionPlan) -> Result<Self> {
        let features: Vec<usize> = clean.feature_cols().collect();
        let mut moments = BTreeMap::new();
        let mut vocab = BTreeMap::new();
        for &c in &features {
            let mut seen: HashSet<CellKey<'_>> = HashSet::new();
            let mut distinct = Vec::new();
            for row in clean.rows() {
                if seen.insert(row[c].key()) {
                    distinct.push(row[c].clone());
                }
            }
            vocab.insert(c, distinct);
            if clean.column(c).kind == ColumnKind::Numeric {
                let values = clean.numeric_values(c);
                let n = values.len() as f64;
                let mean = values.iter().sum::<f64>() / n;
                let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                if var > 0.0 {
                    moments.insert(c, (mean, var.sqrt()));
                }
            }
        }

        let mut rv_cells = BTreeSet::new();
        if plan.type_mix.rv > 0.0 {
            for rule in &plan.fd_rules {
                let (lhs, rhs) = rule.resolve(clean)?;
                if Some(rhs) == clean.label_col() {
                    return Err(Error::Plan(format!(
                        "fd rule {rule} targets the label column"
                    )));
                }
                if vocab[&rhs].len() < 2 {
                    continue;
                }
                for group in FdRule::groups(&lhs, clean) {
                    if group.len() >= 2 {
                        rv_cells.extend(group.iter().map(|&r| CellRef::new(r, rhs)));
                    }
                }
            }
            if rv_cells.is_empty() {
                return Err(Error::Plan(
                    "rule-violation errors requested but no fd rule has an lhs group of two or more rows \
                     with a varying rhs column"
                        .into(),
                ));
            }
        }
        Ok(Context {
            clean,
            outlier_scale: plan.outlier_scale,
            moments,
            vocab,
            rv_cells,
        })
    }

    fn compatible(&self, ty: ErrorType) -> Vec<CellRef> {
        let cols: Vec<usize> = match ty {
            ErrorType::RuleViolation => return self.rv_cells.iter().copied().collect(),
            ErrorType::MissingValue => self.clean.feature_cols().collect(),
            ErrorType::Outlier => self.moments.keys().copied().collect(),
            ErrorType::Typo => self
                .clean
                .feature_cols()
                .filter(|&c| self.clean.column(c).kind == ColumnKind::Categorical)
                .collect(),
        };
        let mut cells: Vec<CellRef> = (0..self.clean.n_rows())
            .flat_map(|r| cols.iter().map(move |&c| CellRef::new(r, c)))
            .collect();
        cells.sort();
        cells
    }

    fn corrupt(&self, ty: ErrorType, at: CellRef, original: &Cell, rng: &mut ChaCha8Rng) -> Cell {
        match ty {
            ErrorType::MissingValue => Cell::Missing,
            ErrorType::Outlier => {
                let (mean, std) = self.moments[&at.col];
                let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                let mut value = mean + sign * self.outlier_scale * std;
                if Some(value) == original.as_number() {
                    value = mean - sign * self.outlier_scale * std;
                }
                Cell::Number(value)
            }
            ErrorType::Typo => {
                let text = original.as_text().unwrap_or_default();
                Cell::Text(self.typo(at.col, text, rng))
            }
            ErrorType::RuleViolation => {
                let others: Vec<&Cell> = self.vocab[&at.col]
                    .iter()
                    .filter(|v| v.key() != original.key())
                    .collect();
                others[rng.random_range(0..others.len())].clone()
            }
        }
    }

    /// One random character substitution that leaves the column vocabulary.
    fn typo(&self, col: usize, text: &str, rng: &mut ChaCha8Rng) -> String {
        let in_vocab = |s: &str| {
            self.vocab[&col]
                .iter()
                .any(|v| v.as_text() == Some(s))
        };
        let chars: Vec<char> = text.chars().collect();
        if !chars.is_empty() {
            for _ in 0..64 {
                let pos = rng.random_range(0..chars.len());
                let ch = TYPO_ALPHABET[rng.random_range(0..TYPO_ALPHABET.len())] as char;
                if ch == chars[pos] {
                    continue;
                }
                let mut out = chars.clone();
                out[pos] = ch;
                let s: String = out.into_iter().collect();
                if !in_vocab(&s) {
                    return s;
                }
            }
        }
        // Every nearby substitution is taken; grow the string until it is new.
        let mut s = text.to_string();
        loop {
            s.push(TYPO_ALPHABET[rng.random_range(0..TYPO_ALPHABET.len())] as char);
            if !in_vocab(&s) {
                return s;
            }
        }
    }
}
