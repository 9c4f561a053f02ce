//! Fixture loading shared by the benchmarks.

use std::path::{Path, PathBuf};

use dlearn::constraints::{parse_constraints, ConstraintSet};
use dlearn::eval::Examples;
use dlearn::store::{Database, Schema};

pub struct Fixture {
    pub db: Database,
    pub constraints: ConstraintSet,
    pub examples: Examples,
}

fn dir(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

/// Loads `fixtures/<name>`; the target relation is `highGrossing`.
pub fn load(name: &str) -> Fixture {
    let d = dir(name);
    let read = |f: &str| std::fs::read_to_string(d.join(f)).expect("fixture file");
    let schema = Schema::parse(&read("schema.txt")).expect("schema");
    let db = Database::load_csv(schema, "highGrossing", &d.join("data")).expect("data");
    let constraints =
        parse_constraints(&read("constraints.txt"), db.schema()).expect("constraints");
    let examples = Examples::parse(&read("examples.csv"), 1).expect("examples");
    Fixture {
        db,
        constraints,
        examples,
    }
}
