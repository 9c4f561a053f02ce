//! The covering loop: learns one clause at a time from random seeds until every
//! positive example is covered or no seed yields an acceptable clause.

use std::collections::BTreeSet;
use std::fmt;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::constraints::ConstraintSet;
use crate::generalization::{armg, best_candidate, coverage, order_clause, score, Score};
use crate::logic::{parse_clause, Clause, LogicError};
use crate::saturation::{bottom_clause, ground_bottom_clause, SaturationConfig, SaturationError};
use crate::store::{Database, Value};
use crate::subsumption::{SubsumptionConfig, Target, DEFAULT_BUDGET};
use crate::textsim::{SimParams, SimilarityIndex};

#[derive(Debug, Error)]
pub enum LearnerError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("no positive examples")]
    NoPositives,
    #[error(transparent)]
    Saturation(#[from] SaturationError),
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

/// Named random streams derived from the run seed.
pub mod stream {
    pub const SEEDS: u64 = 1;
    pub const SUBSETS: u64 = 2;
    pub const FOLDS: u64 = 3;
}

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearnerConfig {
    pub d: usize,
    pub k_m: usize,
    pub sample_size: usize,
    pub sim_threshold: f64,
    /// Examples drawn per generalization round.
    pub k: usize,
    pub min_pos: usize,
    pub min_precision: f64,
    pub seed: u64,
    pub budget: u64,
    pub repair_cap: usize,
    pub cfd_fixpoint_cap: usize,
    /// Worker threads; 0 uses the rayon default.
    pub threads: usize,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        let sim = SimParams::default();
        let sat = SaturationConfig::default();
        LearnerConfig {
            d: 4,
            k_m: sim.k_m,
            sample_size: sat.sample_size,
            sim_threshold: sim.threshold,
            k: 10,
            min_pos: 2,
            min_precision: 0.7,
            seed: 0,
            budget: DEFAULT_BUDGET,
            repair_cap: SubsumptionConfig::default().repair_cap,
            cfd_fixpoint_cap: sat.cfd_fixpoint_cap,
            threads: 0,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<(), LearnerError> {
        if self.k == 0 {
            return Err(LearnerError::InvalidConfig("K must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.min_precision) {
            return Err(LearnerError::InvalidConfig(
                "min_precision must lie in [0,1]",
            ));
        }
        if self.k_m == 0 {
            return Err(LearnerError::InvalidConfig("k_m must be positive"));
        }
        if !(0.0..=1.0).contains(&self.sim_threshold) {
            return Err(LearnerError::InvalidConfig(
                "similarity threshold must lie in [0,1]",
            ));
        }
        if self.budget == 0 {
            return Err(LearnerError::InvalidConfig("budget must be positive"));
        }
        self.saturation().validate()?;
        Ok(())
    }

    pub fn saturation(&self) -> SaturationConfig {
        SaturationConfig {
            d: self.d,
            sample_size: self.sample_size,
            rng_seed: self.seed,
            cfd_fixpoint_cap: self.cfd_fixpoint_cap,
        }
    }

    pub fn sim_params(&self) -> SimParams {
        SimParams {
            k_m: self.k_m,
            threshold: self.sim_threshold,
        }
    }

    pub fn subsumption(&self) -> SubsumptionConfig {
        SubsumptionConfig {
            budget: self.budget,
            repair_cap: self.repair_cap,
        }
    }

    /// Runs `f` on a pool with the configured thread count.
    pub fn install<T: Send>(&self, f: impl FnOnce() -> T + Send) -> Result<T, LearnerError> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.threads)
            .build()
            .map_err(|e| LearnerError::ThreadPool(e.to_string()))?;
        Ok(pool.install(f))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LearnedClause {
    pub clause: Clause,
    pub pos: usize,
    pub neg: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LearnedDefinition {
    pub clauses: Vec<LearnedClause>,
    /// Coverage tests that hit the subsumption budget or repair cap.
    pub flagged: usize,
}

impl LearnedDefinition {
    pub fn clauses(&self) -> impl Iterator<Item = &Clause> {
        self.clauses.iter().map(|c| &c.clause)
    }

    /// Reads the text form; `# pos=<n> neg=<m>` lines attach counts to the next clause.
    pub fn parse(text: &str) -> Result<Self, LogicError> {
        let mut out = LearnedDefinition::default();
        let mut counts = (0, 0);
        let mut pending = String::new();
        for line in text.lines() {
            let t = line.trim();
            if let Some(c) = t.strip_prefix('#') {
                for part in c.split_whitespace() {
                    if let Some(v) = part.strip_prefix("pos=") {
                        counts.0 = v.parse().unwrap_or(0);
                    } else if let Some(v) = part.strip_prefix("neg=") {
                        counts.1 = v.parse().unwrap_or(0);
                    }
                }
                continue;
            }
            if t.is_empty() {
                continue;
            }
            pending.push_str(t);
            pending.push(' ');
            if t.ends_with('.') {
                out.clauses.push(LearnedClause {
                    clause: parse_clause(&pending)?,
                    pos: counts.0,
                    neg: counts.1,
                });
                pending.clear();
                counts = (0, 0);
            }
        }
        if !pending.trim().is_empty() {
            parse_clause(&pending)?;
        }
        Ok(out)
    }
}

impl fmt::Display for LearnedDefinition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.clauses {
            writeln!(f, "# pos={} neg={}", c.pos, c.neg)?;
            writeln!(f, "{}", c.clause)?;
        }
        Ok(())
    }
}

/// `pos ≥ min_pos` (and at least one) and `pos / (pos + neg) ≥ min_precision`.
pub fn minimum_criterion(s: &Score, cfg: &LearnerConfig) -> bool {
    let total = s.pos + s.neg;
    s.pos >= cfg.min_pos.max(1) && total > 0 && s.pos as f64 >= cfg.min_precision * total as f64
}

/// Ground bottom clauses of a set of examples, in input order.
pub fn ground_targets(
    examples: &[Vec<Value>],
    db: &Database,
    cs: &ConstraintSet,
    idx: &SimilarityIndex,
    cfg: &SaturationConfig,
) -> Result<Vec<Target>, SaturationError> {
    examples
        .par_iter()
        .map(|e| ground_bottom_clause(e, db, cs, idx, cfg).map(Target::new))
        .collect()
}

/// Everything a learning run needs besides the configuration.
pub struct Problem<'a> {
    pub db: &'a Database,
    pub constraints: &'a ConstraintSet,
    pub index: &'a SimilarityIndex,
    pub pos: &'a [Vec<Value>],
    pub neg: &'a [Vec<Value>],
}

struct Session<'a> {
    p: &'a Problem<'a>,
    cfg: &'a LearnerConfig,
    sub: SubsumptionConfig,
    pos: Vec<Target>,
    neg: Vec<Target>,
    flagged: usize,
}

impl Session<'_> {
    fn refs<'t>(targets: &'t [Target], ids: &[usize]) -> Vec<&'t Target> {
        ids.iter().map(|&i| &targets[i]).collect()
    }

    fn learn_clause(
        &mut self,
        seed: usize,
        uncovered: &[usize],
        rng: &mut ChaCha8Rng,
    ) -> Result<(Clause, Score), LearnerError> {
        let p = self.p;
        let mut c = order_clause(&bottom_clause(
            &p.pos[seed],
            p.db,
            p.constraints,
            p.index,
            &self.cfg.saturation(),
        )?);
        let negs: Vec<&Target> = self.neg.iter().collect();
        let upos = Self::refs(&self.pos, uncovered);
        let mut cur = score(&c, &upos, &negs, &self.sub);
        self.flagged += cur.flagged;
        loop {
            let n = self.cfg.k.min(uncovered.len());
            let mut picks = sample(rng, uncovered.len(), n).into_vec();
            picks.sort_unstable();
            let cands: Vec<Clause> = picks
                .par_iter()
                .map(|&i| armg(&c, &self.pos[uncovered[i]], &self.sub))
                .collect::<Vec<_>>()
                .into_iter()
                .map(|g| {
                    self.flagged += usize::from(g.flagged);
                    g.clause
                })
                .collect();
            let Some((best, s)) = best_candidate(&cands, &upos, &negs, &self.sub) else {
                break;
            };
            self.flagged += s.flagged;
            if s.value() > cur.value() {
                c = best;
                cur = s;
            } else {
                break;
            }
        }
        Ok((c, cur))
    }
}

/// Learns a definition of the target relation with a precomputed similarity index.
pub fn learn_with_index(
    problem: &Problem<'_>,
    cfg: &LearnerConfig,
) -> Result<LearnedDefinition, LearnerError> {
    cfg.validate()?;
    if problem.pos.is_empty() {
        return Err(LearnerError::NoPositives);
    }
    cfg.install(|| {
        let sat = cfg.saturation();
        let mut s = Session {
            p: problem,
            cfg,
            sub: cfg.subsumption(),
            pos: ground_targets(
                problem.pos,
                problem.db,
                problem.constraints,
                problem.index,
                &sat,
            )?,
            neg: ground_targets(
                problem.neg,
                problem.db,
                problem.constraints,
                problem.index,
                &sat,
            )?,
            flagged: 0,
        };
        let mut seeds_rng = stream_rng(cfg.seed, stream::SEEDS);
        let mut subset_rng = stream_rng(cfg.seed, stream::SUBSETS);
        let mut uncovered: BTreeSet<usize> = (0..problem.pos.len()).collect();
        let mut tried: BTreeSet<usize> = BTreeSet::new();
        let mut def = LearnedDefinition::default();
        loop {
            let open: Vec<usize> = uncovered.difference(&tried).copied().collect();
            if open.is_empty() {
                break;
            }
            let seed = open[seeds_rng.gen_range(0..open.len())];
            tried.insert(seed);
            let u: Vec<usize> = uncovered.iter().copied().collect();
            let (clause, sc) = s.learn_clause(seed, &u, &mut subset_rng)?;
            if !minimum_criterion(&sc, cfg) {
                continue;
            }
            let (pc, _, _) = coverage(&clause, &Session::refs(&s.pos, &u), &[], &s.sub);
            for (i, hit) in u.iter().zip(pc) {
                if hit {
                    uncovered.remove(i);
                }
            }
            let all_pos: Vec<&Target> = s.pos.iter().collect();
            let all_neg: Vec<&Target> = s.neg.iter().collect();
            let total = score(&clause, &all_pos, &all_neg, &s.sub);
            s.flagged += total.flagged;
            def.clauses.push(LearnedClause {
                clause,
                pos: total.pos,
                neg: total.neg,
            });
        }
        def.flagged = s.flagged;
        Ok(def)
    })?
}

/// Learns a definition, building the similarity index from the data and all examples.
pub fn learn(
    db: &Database,
    constraints: &ConstraintSet,
    pos: &[Vec<Value>],
    neg: &[Vec<Value>],
    cfg: &LearnerConfig,
) -> Result<LearnedDefinition, LearnerError> {
    let all: Vec<Vec<Value>> = pos.iter().chain(neg).cloned().collect();
    let index = SimilarityIndex::build(db, &all, &constraints.mds, cfg.sim_params());
    learn_with_index(
        &Problem {
            db,
            constraints,
            index: &index,
            pos,
            neg,
        },
        cfg,
    )
}
