//! Bundled datasets, vocabularies and the named instances used by the demos.

use crate::data::{parse_csv, DataError, Dataset, FeatureSchema, Instance, SchemaHint};

pub const TITANIC_CSV: &str = include_str!("../data/titanic.csv");
pub const TITANIC_VOCABULARY: &str = include_str!("../data/titanic.voc");
pub const CARS_CSV: &str = include_str!("../data/cars.csv");
pub const CARS_VOCABULARY: &str = include_str!("../data/cars.voc");

/// 1-based row number of the `vgood` car explained in the demo.
pub const CAR_INSTANCE_ROW: usize = 1098;

pub fn titanic_hint() -> SchemaHint {
    SchemaHint::labelled("survived")
        .with_levels(
            "class",
            [
                "1st",
                "2nd",
                "3rd",
                "deck crew",
                "engineering crew",
                "restaurant staff",
                "victualling crew",
            ],
        )
        .with_levels("gender", ["female", "male"])
        .with_levels("embarked", ["Belfast", "Cherbourg", "Queenstown", "Southampton"])
        .with_classes(["no", "yes"])
}

pub fn cars_hint() -> SchemaHint {
    SchemaHint::labelled("class")
        .with_levels("buying", ["vhigh", "high", "med", "low"])
        .with_levels("maint", ["vhigh", "high", "med", "low"])
        .with_levels("doors", ["2", "3", "4", "5more"])
        .with_levels("persons", ["2", "4", "more"])
        .with_levels("lug_boot", ["small", "med", "big"])
        .with_levels("safety", ["low", "med", "high"])
        .with_classes(["unacc", "acc", "good", "vgood"])
}

pub fn titanic() -> Dataset {
    parse_csv(TITANIC_CSV, &titanic_hint()).expect("bundled Titanic data parses")
}

pub fn cars() -> Dataset {
    parse_csv(CARS_CSV, &cars_hint()).expect("bundled Cars data parses")
}

/// Eight-year-old boy travelling first class from Southampton without family,
/// ticket fare 72.
pub fn johnny_d(schema: &FeatureSchema) -> Result<Instance, DataError> {
    Instance::from_pairs(
        schema,
        &[
            ("class", "1st"),
            ("gender", "male"),
            ("age", "8"),
            ("sibsp", "0"),
            ("parch", "0"),
            ("fare", "72"),
            ("embarked", "Southampton"),
        ],
    )
}

/// Resolves a named instance against `schema`. The bundled car is re-encoded
/// by level name, so any schema with the Cars columns accepts it.
pub fn named_instance(name: &str, schema: &FeatureSchema) -> Option<Result<Instance, DataError>> {
    match name {
        "johnny_d" => Some(johnny_d(schema)),
        "car1098" | "car_1098" => {
            let data = cars();
            let described = data.instances[CAR_INSTANCE_ROW - 1].describe(&data.schema);
            let pairs: Vec<(&str, &str)> = described.iter().map(|(n, v)| (n.as_str(), v.as_str())).collect();
            Some(Instance::from_pairs(schema, &pairs))
        }
        _ => None,
    }
}
