use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use dlearn::constraints::{parse_constraints, ConstraintSet};
use dlearn::eval::{cross_validate, evaluate, Examples, Metrics, RunMode};
use dlearn::learner::{learn_with_index, LearnedDefinition, LearnerConfig, Problem};
use dlearn::logic::{parse_clause, Clause};
use dlearn::oracle::{brute_force_entails, enumerate_repairs, Instance, DEFAULT_INSTANCE_CAP};
use dlearn::saturation::{bottom_clause, ground_bottom_clause};
use dlearn::store::{value, Database, Schema, Value};
use dlearn::subsumption::{format_witness, subsumes_with_repairs, theta_subsumes};
use dlearn::textsim::SimilarityIndex;

#[derive(Parser)]
#[command(
    name = "dlearn",
    version,
    about = "Learn relational definitions over dirty data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Learn a definition of the target relation.
    Learn {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        opts: LearnArgs,
        /// Labelled examples, one `+|-,v1,...` line each.
        #[arg(long)]
        examples: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        metrics_csv: Option<PathBuf>,
    },
    /// Score a learned definition on labelled examples.
    Eval {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        opts: LearnArgs,
        #[arg(long)]
        definition: PathBuf,
        #[arg(long)]
        examples: PathBuf,
        #[arg(long)]
        metrics_csv: Option<PathBuf>,
    },
    /// Stratified cross-validation.
    Cv {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        opts: LearnArgs,
        #[arg(long)]
        examples: PathBuf,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        #[arg(long)]
        metrics_csv: Option<PathBuf>,
    },
    /// Print the bottom clause of one example.
    Saturate {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        opts: LearnArgs,
        /// Comma separated values of the example tuple.
        #[arg(long)]
        example: String,
        /// Keep constants (the clause used for coverage tests).
        #[arg(long)]
        ground: bool,
    },
    /// Check whether the clause in file A subsumes the clause in file B.
    Subsume {
        a: PathBuf,
        b: PathBuf,
        /// Plain θ-subsumption instead of the repair-aware test.
        #[arg(long)]
        plain: bool,
    },
    /// Dump the similarity index as CSV.
    SimIndex {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        examples: Option<PathBuf>,
        #[arg(long)]
        km: Option<usize>,
        #[arg(long)]
        sim_threshold: Option<f64>,
    },
    #[command(hide = true, subcommand)]
    Oracle(OracleCommand),
}

#[derive(Subcommand)]
enum OracleCommand {
    /// Enumerate the repairs of the data plus the given examples.
    Repairs {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        examples: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_INSTANCE_CAP)]
        cap: usize,
    },
    /// Brute-force entailment between the clauses in files A and B.
    Entails {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value_t = DEFAULT_INSTANCE_CAP)]
        cap: usize,
    },
}

#[derive(Args)]
struct DataArgs {
    /// Schema file, one `relation(attr:domain, ...)` per line.
    #[arg(long)]
    schema: PathBuf,
    /// Directory holding `<relation>.csv` for every background relation.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    constraints: Option<PathBuf>,
    /// Target relation; defaults to the only relation without a data file.
    #[arg(long)]
    target: Option<String>,
}

#[derive(Args)]
struct LearnArgs {
    #[arg(long, default_value = "full")]
    mode: RunMode,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    km: Option<usize>,
    #[arg(long)]
    sample_size: Option<usize>,
    #[arg(long)]
    sim_threshold: Option<f64>,
    /// Examples drawn per generalization round.
    #[arg(long = "K")]
    k: Option<usize>,
    #[arg(long)]
    min_pos: Option<usize>,
    #[arg(long)]
    min_precision: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
}

impl LearnArgs {
    fn config(&self) -> LearnerConfig {
        let mut c = LearnerConfig::default();
        let set = |slot: &mut usize, v: Option<usize>| {
            if let Some(v) = v {
                *slot = v;
            }
        };
        set(&mut c.d, self.d);
        set(&mut c.k_m, self.km);
        set(&mut c.sample_size, self.sample_size);
        set(&mut c.k, self.k);
        set(&mut c.min_pos, self.min_pos);
        set(&mut c.threads, self.threads);
        c.sim_threshold = self.sim_threshold.unwrap_or(c.sim_threshold);
        c.min_precision = self.min_precision.unwrap_or(c.min_precision);
        c.seed = self.seed.unwrap_or(c.seed);
        c
    }
}

struct Dataset {
    db: Database,
    constraints: ConstraintSet,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn target_name(schema: &Schema, dir: &Path, given: Option<&str>) -> Result<String> {
    if let Some(t) = given {
        return Ok(t.to_string());
    }
    let missing: Vec<&str> = schema
        .relations()
        .iter()
        .map(|r| r.name.as_str())
        .filter(|n| !dir.join(format!("{n}.csv")).is_file())
        .collect();
    match missing.as_slice() {
        [one] => Ok(one.to_string()),
        [] => bail!("every relation has a data file; name the target with --target"),
        many => bail!(
            "relations without data files: {}; name the target with --target",
            many.join(", ")
        ),
    }
}

impl DataArgs {
    fn load(&self, mode: RunMode) -> Result<Dataset> {
        let schema = Schema::parse(&read(&self.schema)?)?;
        let target = target_name(&schema, &self.data, self.target.as_deref())?;
        let db = Database::load_csv(schema, &target, &self.data)?;
        let constraints = match &self.constraints {
            Some(p) => parse_constraints(&read(p)?, db.schema())?,
            None => ConstraintSet::default(),
        };
        Ok(Dataset {
            constraints: mode.constraints(&constraints),
            db,
        })
    }
}

fn load_examples(path: &Path, db: &Database) -> Result<Examples> {
    Examples::parse(&read(path)?, db.target_decl().arity())
        .with_context(|| format!("in {}", path.display()))
}

fn read_clause(path: &Path) -> Result<Clause> {
    parse_clause(&read(path)?).with_context(|| format!("in {}", path.display()))
}

fn report(rows: &[(String, Metrics)], csv: Option<&Path>) -> Result<()> {
    println!("{}", Metrics::TABLE_HEADER);
    for (run, m) in rows {
        println!("{}", m.table_row(run));
    }
    if let Some(path) = csv {
        let mut text = format!("{}\n", Metrics::CSV_HEADER);
        for (run, m) in rows {
            text.push_str(&m.csv_row(run));
            text.push('\n');
        }
        fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn index_for(ds: &Dataset, ex: &Examples, cfg: &LearnerConfig) -> SimilarityIndex {
    SimilarityIndex::build(&ds.db, &ex.all(), &ds.constraints.mds, cfg.sim_params())
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Learn {
            data,
            opts,
            examples,
            out,
            metrics_csv,
        } => {
            let ds = data.load(opts.mode)?;
            let ex = load_examples(&examples, &ds.db)?;
            let cfg = opts.config();
            let idx = index_for(&ds, &ex, &cfg);
            let start = std::time::Instant::now();
            let def = learn_with_index(
                &Problem {
                    db: &ds.db,
                    constraints: &ds.constraints,
                    index: &idx,
                    pos: &ex.pos,
                    neg: &ex.neg,
                },
                &cfg,
            )?;
            let learned = start.elapsed().as_secs_f64();
            fs::write(&out, def.to_string())
                .with_context(|| format!("writing {}", out.display()))?;
            let mut m = evaluate(&def, &ex, &ds.db, &ds.constraints, &idx, &cfg)?;
            m.wall_time += learned;
            eprintln!(
                "{} clause(s) written to {}; {} coverage test(s) hit a budget",
                def.clauses.len(),
                out.display(),
                def.flagged
            );
            report(&[("train".into(), m)], metrics_csv.as_deref())?;
        }
        Command::Eval {
            data,
            opts,
            definition,
            examples,
            metrics_csv,
        } => {
            let ds = data.load(opts.mode)?;
            let ex = load_examples(&examples, &ds.db)?;
            let cfg = opts.config();
            let def = LearnedDefinition::parse(&read(&definition)?)
                .with_context(|| format!("in {}", definition.display()))?;
            let idx = index_for(&ds, &ex, &cfg);
            let m = evaluate(&def, &ex, &ds.db, &ds.constraints, &idx, &cfg)?;
            report(&[("test".into(), m)], metrics_csv.as_deref())?;
        }
        Command::Cv {
            data,
            opts,
            examples,
            folds,
            metrics_csv,
        } => {
            let ds = data.load(opts.mode)?;
            let ex = load_examples(&examples, &ds.db)?;
            let r = cross_validate(&ds.db, &ds.constraints, &ex, folds, &opts.config())?;
            let mut rows: Vec<(String, Metrics)> = r
                .folds
                .iter()
                .enumerate()
                .map(|(k, m)| (format!("fold{}", k + 1), *m))
                .collect();
            rows.push(("mean".into(), r.mean));
            report(&rows, metrics_csv.as_deref())?;
        }
        Command::Saturate {
            data,
            opts,
            example,
            ground,
        } => {
            let ds = data.load(opts.mode)?;
            let e: Vec<Value> = example.split(',').map(|v| value(v.trim())).collect();
            let arity = ds.db.target_decl().arity();
            if e.len() != arity {
                bail!("example has {} values, the target has {arity}", e.len());
            }
            let cfg = opts.config();
            cfg.validate()?;
            let ex = Examples {
                pos: vec![e.clone()],
                neg: Vec::new(),
            };
            let idx = index_for(&ds, &ex, &cfg);
            let build = if ground {
                ground_bottom_clause
            } else {
                bottom_clause
            };
            println!(
                "{}",
                build(&e, &ds.db, &ds.constraints, &idx, &cfg.saturation())?
            );
        }
        Command::Subsume { a, b, plain } => {
            let (c, d) = (read_clause(&a)?, read_clause(&b)?);
            let v = if plain {
                theta_subsumes(&c, &d)
            } else {
                subsumes_with_repairs(&c, &d)
            };
            if v.budget_exhausted {
                eprintln!("search budget exhausted");
            }
            return Ok(match v.witness.filter(|_| v.covered) {
                Some(w) => {
                    println!("COVERED {}", format_witness(&w));
                    ExitCode::SUCCESS
                }
                None => {
                    println!("NOT_COVERED");
                    ExitCode::from(1)
                }
            });
        }
        Command::SimIndex {
            data,
            examples,
            km,
            sim_threshold,
        } => {
            let ds = data.load(RunMode::Full)?;
            let ex = match &examples {
                Some(p) => load_examples(p, &ds.db)?,
                None => Examples::default(),
            };
            let mut cfg = LearnerConfig::default();
            cfg.k_m = km.unwrap_or(cfg.k_m);
            cfg.sim_threshold = sim_threshold.unwrap_or(cfg.sim_threshold);
            cfg.validate()?;
            print!("{}", index_for(&ds, &ex, &cfg).to_csv());
        }
        Command::Oracle(OracleCommand::Repairs {
            data,
            examples,
            cap,
        }) => {
            let ds = data.load(RunMode::Full)?;
            let ex = match &examples {
                Some(p) => load_examples(p, &ds.db)?,
                None => Examples::default(),
            };
            let idx = index_for(&ds, &ex, &LearnerConfig::default());
            let inst = Instance::of(&ds.db, &ex.all());
            let repairs = enumerate_repairs(&inst, ds.db.schema(), &ds.constraints, &idx, cap)?;
            println!("{} repair(s)", repairs.len());
            for (k, r) in repairs.iter().enumerate() {
                println!("# repair {} ({} operation(s))", k + 1, r.lineage.len());
                for (decl, rows) in ds.db.schema().relations().iter().zip(&r.instance.rows) {
                    for row in rows {
                        let vals: Vec<String> = row.iter().map(|v| format!("'{v}'")).collect();
                        println!("{}({})", decl.name, vals.join(","));
                    }
                }
            }
        }
        Command::Oracle(OracleCommand::Entails { a, b, cap }) => {
            let yes = brute_force_entails(&read_clause(&a)?, &read_clause(&b)?, cap)?;
            println!("{}", if yes { "ENTAILED" } else { "NOT_ENTAILED" });
            return Ok(if yes {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            });
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
