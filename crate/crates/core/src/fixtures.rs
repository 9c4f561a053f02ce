//! Shared test fixtures: the running movie example.

use crate::constraints::{parse_constraints, ConstraintSet};
use crate::saturation::SaturationConfig;
use crate::store::{Database, Schema, Value};

pub(crate) const PAPER_SCHEMA: &str = "\
highGrossing(title:text)
movies(id:text, title:text, year:integer:free)
mov2genres(id:text, genre:text:const)
mov2countries(id:text, country:text:out)
countries(id:text, name:text:const)
englishMovies(id:text)
mov2releasedate(id:text, month:text:const, year:integer:free)
";

pub(crate) fn paper_db() -> Database {
    let rows: Vec<(&str, Vec<&str>)> = vec![
        ("movies", vec!["m1", "Superbad (2007)", "2007"]),
        ("movies", vec!["m2", "Zoolander (2001)", "2001"]),
        ("movies", vec!["m3", "Orphanage (2007)", "2007"]),
        ("mov2genres", vec!["m1", "comedy"]),
        ("mov2genres", vec!["m2", "comedy"]),
        ("mov2genres", vec!["m3", "drama"]),
        ("mov2countries", vec!["m1", "c1"]),
        ("mov2countries", vec!["m2", "c1"]),
        ("mov2countries", vec!["m3", "c2"]),
        ("countries", vec!["c1", "USA"]),
        ("countries", vec!["c2", "Spain"]),
        ("englishMovies", vec!["m1"]),
        ("englishMovies", vec!["m2"]),
        ("englishMovies", vec!["m3"]),
        ("mov2releasedate", vec!["m1", "August", "2007"]),
        ("mov2releasedate", vec!["m2", "September", "2001"]),
    ];
    Database::from_rows(Schema::parse(PAPER_SCHEMA).unwrap(), "highGrossing", &rows).unwrap()
}

pub(crate) fn sigma2(db: &Database) -> ConstraintSet {
    parse_constraints(
        "md: highGrossing[title] ~ movies[title] -> highGrossing[title] <-> movies[title]",
        db.schema(),
    )
    .unwrap()
}

pub(crate) fn ex(s: &str) -> Vec<Value> {
    vec![Value::from(s)]
}

pub(crate) fn no_sampling() -> SaturationConfig {
    SaturationConfig {
        sample_size: 1000,
        ..SaturationConfig::default()
    }
}
