//! Held-out evaluation, stratified cross-validation and the labelled example format.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use thiserror::Error;

use crate::constraints::ConstraintSet;
use crate::learner::{
    ground_targets, learn_with_index, stream, stream_rng, LearnedDefinition, LearnerConfig,
    LearnerError, Problem,
};
use crate::saturation::SaturationError;
use crate::store::{value, Database, Value};
use crate::subsumption::{covers_negative_prepared, covers_positive_prepared, Target};
use crate::textsim::SimilarityIndex;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("examples line {line}: {msg}")]
    Examples { line: usize, msg: String },
    #[error("cross-validation needs at least 2 folds, got {0}")]
    TooFewFolds(usize),
    #[error("{positives} positive examples cannot fill {folds} folds")]
    TooFewPositives { positives: usize, folds: usize },
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error(transparent)]
    Saturation(#[from] SaturationError),
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Metrics {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Seconds.
    pub wall_time: f64,
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

impl Metrics {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize, wall_time: f64) -> Self {
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Metrics {
            tp,
            fp,
            fn_,
            precision,
            recall,
            f1,
            wall_time,
        }
    }

    /// Counts summed; precision, recall, F1 and time averaged over the runs.
    pub fn mean(runs: &[Metrics]) -> Metrics {
        let n = runs.len().max(1) as f64;
        let avg = |f: fn(&Metrics) -> f64| runs.iter().map(f).sum::<f64>() / n;
        Metrics {
            tp: runs.iter().map(|m| m.tp).sum(),
            fp: runs.iter().map(|m| m.fp).sum(),
            fn_: runs.iter().map(|m| m.fn_).sum(),
            precision: avg(|m| m.precision),
            recall: avg(|m| m.recall),
            f1: avg(|m| m.f1),
            wall_time: avg(|m| m.wall_time),
        }
    }

    pub const TABLE_HEADER: &'static str =
        "run        tp     fp     fn  precision  recall      f1    time_s";

    pub fn table_row(&self, run: &str) -> String {
        format!(
            "{run:<8} {:>4} {:>6} {:>6} {:>10.4} {:>7.4} {:>7.4} {:>9.3}",
            self.tp, self.fp, self.fn_, self.precision, self.recall, self.f1, self.wall_time
        )
    }

    pub const CSV_HEADER: &'static str = "run,tp,fp,fn,precision,recall,f1,wall_time";

    pub fn csv_row(&self, run: &str) -> String {
        format!(
            "{run},{},{},{},{:.6},{:.6},{:.6},{:.6}",
            self.tp, self.fp, self.fn_, self.precision, self.recall, self.f1, self.wall_time
        )
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum RunMode {
    #[default]
    Full,
    /// Ignores the matching dependencies.
    NoMd,
    /// Ignores the conditional functional dependencies.
    NoCfd,
}

impl RunMode {
    pub fn constraints(self, cs: &ConstraintSet) -> ConstraintSet {
        match self {
            RunMode::Full => cs.clone(),
            RunMode::NoMd => ConstraintSet {
                mds: Vec::new(),
                cfds: cs.cfds.clone(),
            },
            RunMode::NoCfd => ConstraintSet {
                mds: cs.mds.clone(),
                cfds: Vec::new(),
            },
        }
    }
}

impl fmt::Display for RunMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RunMode::Full => "full",
            RunMode::NoMd => "no-md",
            RunMode::NoCfd => "no-cfd",
        })
    }
}

impl FromStr for RunMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "full" => Ok(RunMode::Full),
            "no-md" => Ok(RunMode::NoMd),
            "no-cfd" => Ok(RunMode::NoCfd),
            other => Err(format!("unknown mode {other:?} (full, no-md, no-cfd)")),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Examples {
    pub pos: Vec<Vec<Value>>,
    pub neg: Vec<Vec<Value>>,
}

impl Examples {
    /// Parses `+,v1,...,vk` / `-,v1,...,vk` CSV lines; every example must have `arity` values.
    pub fn parse(text: &str, arity: usize) -> Result<Self, EvalError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let mut out = Examples::default();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| EvalError::Examples {
                line: e.position().map_or(0, |p| p.line() as usize),
                msg: e.to_string(),
            })?;
            let line = rec.position().map_or(0, |p| p.line() as usize);
            let err = |msg: String| EvalError::Examples { line, msg };
            if rec.len() == 1 && rec[0].trim().is_empty() {
                continue;
            }
            let values: Vec<Value> = rec.iter().skip(1).map(value).collect();
            if values.len() != arity {
                return Err(err(format!(
                    "expected {arity} values, found {}",
                    values.len()
                )));
            }
            match rec[0].trim() {
                "+" => out.pos.push(values),
                "-" => out.neg.push(values),
                l => return Err(err(format!("label must be + or -, found {l:?}"))),
            }
        }
        Ok(out)
    }

    pub fn to_text(&self) -> String {
        let mut w = csv::WriterBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_writer(Vec::new());
        for (label, list) in [("+", &self.pos), ("-", &self.neg)] {
            for e in list {
                let row: Vec<&str> = std::iter::once(label)
                    .chain(e.iter().map(|v| &**v))
                    .collect();
                w.write_record(&row).expect("writing to memory");
            }
        }
        String::from_utf8(w.into_inner().expect("flush to memory")).expect("utf-8 input")
    }

    pub fn all(&self) -> Vec<Vec<Value>> {
        self.pos.iter().chain(&self.neg).cloned().collect()
    }
}

/// Number of examples covered by some clause of `def`, using positive or negative
/// coverage.
fn covered(
    def: &LearnedDefinition,
    targets: &[Target],
    positive: bool,
    cfg: &LearnerConfig,
) -> usize {
    let sub = cfg.subsumption();
    targets
        .par_iter()
        .filter(|g| {
            def.clauses().any(|c| {
                if positive {
                    covers_positive_prepared(c, g, &sub).covered
                } else {
                    covers_negative_prepared(c, g, &sub).covered
                }
            })
        })
        .count()
}

/// Scores a definition on held-out examples; `wall_time` is the evaluation time.
pub fn evaluate(
    def: &LearnedDefinition,
    test: &Examples,
    db: &Database,
    cs: &ConstraintSet,
    idx: &SimilarityIndex,
    cfg: &LearnerConfig,
) -> Result<Metrics, EvalError> {
    let start = Instant::now();
    let (tp, fp) = cfg.install(|| -> Result<_, EvalError> {
        let sat = cfg.saturation();
        let pos = ground_targets(&test.pos, db, cs, idx, &sat)?;
        let neg = ground_targets(&test.neg, db, cs, idx, &sat)?;
        Ok((
            covered(def, &pos, true, cfg),
            covered(def, &neg, false, cfg),
        ))
    })??;
    Ok(Metrics::from_counts(
        tp,
        fp,
        test.pos.len() - tp,
        start.elapsed().as_secs_f64(),
    ))
}

/// Fold number of every positive and every negative example, in input order.
pub fn stratified_folds(
    ex: &Examples,
    folds: usize,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>), EvalError> {
    if folds < 2 {
        return Err(EvalError::TooFewFolds(folds));
    }
    if ex.pos.len() < folds {
        return Err(EvalError::TooFewPositives {
            positives: ex.pos.len(),
            folds,
        });
    }
    let mut rng = stream_rng(seed, stream::FOLDS);
    let mut assign = |n: usize| {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let mut fold = vec![0; n];
        for (k, i) in order.into_iter().enumerate() {
            fold[i] = k % folds;
        }
        fold
    };
    let p = assign(ex.pos.len());
    let n = assign(ex.neg.len());
    Ok((p, n))
}

fn pick(list: &[Vec<Value>], folds: &[usize], keep: impl Fn(usize) -> bool) -> Vec<Vec<Value>> {
    list.iter()
        .zip(folds)
        .filter(|(_, f)| keep(**f))
        .map(|(e, _)| e.clone())
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    pub folds: Vec<Metrics>,
    pub mean: Metrics,
    pub definitions: Vec<LearnedDefinition>,
}

/// Learns on all but one fold and evaluates on the held-out fold, for every fold.
/// `wall_time` of a fold covers learning and evaluation.
pub fn cross_validate(
    db: &Database,
    cs: &ConstraintSet,
    ex: &Examples,
    folds: usize,
    cfg: &LearnerConfig,
) -> Result<CvReport, EvalError> {
    let (pf, nf) = stratified_folds(ex, folds, cfg.seed)?;
    let idx = SimilarityIndex::build(db, &ex.all(), &cs.mds, cfg.sim_params());
    let mut report = CvReport {
        folds: Vec::new(),
        mean: Metrics::default(),
        definitions: Vec::new(),
    };
    for k in 0..folds {
        let start = Instant::now();
        let train = Examples {
            pos: pick(&ex.pos, &pf, |f| f != k),
            neg: pick(&ex.neg, &nf, |f| f != k),
        };
        let test = Examples {
            pos: pick(&ex.pos, &pf, |f| f == k),
            neg: pick(&ex.neg, &nf, |f| f == k),
        };
        let def = learn_with_index(
            &Problem {
                db,
                constraints: cs,
                index: &idx,
                pos: &train.pos,
                neg: &train.neg,
            },
            cfg,
        )?;
        let mut m = evaluate(&def, &test, db, cs, &idx, cfg)?;
        m.wall_time = start.elapsed().as_secs_f64();
        report.folds.push(m);
        report.definitions.push(def);
    }
    report.mean = Metrics::mean(&report.folds);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{ex, paper_db, sigma2};
    use crate::learner::learn;
    use proptest::prelude::*;

    #[test]
    fn metric_edge_cases() {
        let m = Metrics::from_counts(3, 0, 0, 0.0);
        assert_eq!((m.precision, m.recall, m.f1), (1.0, 1.0, 1.0));
        let empty = Metrics::from_counts(0, 0, 4, 0.0);
        assert_eq!((empty.precision, empty.recall, empty.f1), (0.0, 0.0, 0.0));
        let m = Metrics::from_counts(2, 2, 2, 0.0);
        assert!((m.f1 - 0.5).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn metric_identities(tp in 0usize..50, fp in 0usize..50, fn_ in 0usize..50) {
            let m = Metrics::from_counts(tp, fp, fn_, 0.0);
            if tp + fp > 0 {
                prop_assert!((m.precision * (tp + fp) as f64 - tp as f64).abs() < 1e-9);
            }
            if tp + fn_ > 0 {
                prop_assert!((m.recall * (tp + fn_) as f64 - tp as f64).abs() < 1e-9);
            }
            prop_assert!((0.0..=1.0).contains(&m.f1));
            if m.precision + m.recall > 0.0 {
                let h = 2.0 * m.precision * m.recall / (m.precision + m.recall);
                prop_assert!((m.f1 - h).abs() < 1e-12);
            }
        }

        #[test]
        fn folds_are_stratified(np in 2usize..40, nn in 0usize..60, folds in 2usize..6, seed in any::<u64>()) {
            prop_assume!(np >= folds);
            let e = |i: usize| vec![value(&i.to_string())];
            let ex = Examples {
                pos: (0..np).map(e).collect(),
                neg: (0..nn).map(e).collect(),
            };
            let (p, n) = stratified_folds(&ex, folds, seed).unwrap();
            for k in 0..folds {
                let cp = p.iter().filter(|&&f| f == k).count();
                let cn = n.iter().filter(|&&f| f == k).count();
                prop_assert!(cp == np / folds || cp == np / folds + 1);
                prop_assert!(cn == nn / folds || cn == nn / folds + 1);
            }
            prop_assert_eq!(stratified_folds(&ex, folds, seed).unwrap(), (p, n));
        }
    }

    #[test]
    fn fold_sizes_follow_the_ratio() {
        let e = |i: usize| vec![value(&i.to_string())];
        let ex = Examples {
            pos: (0..100).map(e).collect(),
            neg: (0..200).map(e).collect(),
        };
        let (p, n) = stratified_folds(&ex, 5, 7).unwrap();
        for k in 0..5 {
            assert_eq!(p.iter().filter(|&&f| f == k).count(), 20);
            assert_eq!(n.iter().filter(|&&f| f == k).count(), 40);
        }
        let two = Examples {
            pos: vec![e(0), e(1)],
            neg: vec![],
        };
        let (p, _) = stratified_folds(&two, 2, 1).unwrap();
        assert_ne!(p[0], p[1]);
    }

    #[test]
    fn fold_errors() {
        let ex = Examples {
            pos: vec![ex("a")],
            neg: vec![],
        };
        assert!(matches!(
            stratified_folds(&ex, 2, 0),
            Err(EvalError::TooFewPositives {
                positives: 1,
                folds: 2
            })
        ));
        assert!(matches!(
            stratified_folds(&ex, 1, 0),
            Err(EvalError::TooFewFolds(1))
        ));
    }

    #[test]
    fn examples_round_trip() {
        let text = "+,Superbad\n-,\"Orphanage, The\"\n# note\n+,Zoolander\n";
        let ex = Examples::parse(text, 1).unwrap();
        assert_eq!(ex.pos.len(), 2);
        assert_eq!(&*ex.neg[0][0], "Orphanage, The");
        assert_eq!(Examples::parse(&ex.to_text(), 1).unwrap(), ex);
        assert!(matches!(
            Examples::parse("*,x\n", 1),
            Err(EvalError::Examples { line: 1, .. })
        ));
        assert!(matches!(
            Examples::parse("+,x\n+,a,b\n", 1),
            Err(EvalError::Examples { line: 2, .. })
        ));
    }

    #[test]
    fn modes_filter_constraints() {
        let db = paper_db();
        let cs = sigma2(&db);
        assert_eq!(RunMode::Full.constraints(&cs), cs);
        assert!(RunMode::NoMd.constraints(&cs).mds.is_empty());
        assert_eq!(RunMode::NoCfd.constraints(&cs).mds, cs.mds);
        let none = ConstraintSet::default();
        assert_eq!(
            RunMode::NoMd.constraints(&none),
            RunMode::Full.constraints(&none)
        );
        for m in [RunMode::Full, RunMode::NoMd, RunMode::NoCfd] {
            assert_eq!(m.to_string().parse::<RunMode>().unwrap(), m);
        }
    }

    #[test]
    fn evaluate_running_example() {
        let db = paper_db();
        let cs = sigma2(&db);
        let cfg = LearnerConfig {
            d: 3,
            sample_size: 1000,
            min_pos: 1,
            ..LearnerConfig::default()
        };
        let train = Examples {
            pos: vec![ex("Superbad"), ex("Zoolander")],
            neg: vec![ex("Orphanage")],
        };
        let def = learn(&db, &cs, &train.pos, &train.neg, &cfg).unwrap();
        let idx = SimilarityIndex::build(&db, &train.all(), &cs.mds, cfg.sim_params());
        let m = evaluate(&def, &train, &db, &cs, &idx, &cfg).unwrap();
        assert_eq!((m.tp, m.fp, m.fn_), (2, 0, 0));
        assert_eq!(m.f1, 1.0);
        let empty = evaluate(&LearnedDefinition::default(), &train, &db, &cs, &idx, &cfg).unwrap();
        assert_eq!((empty.precision, empty.recall, empty.f1), (0.0, 0.0, 0.0));
    }
}
