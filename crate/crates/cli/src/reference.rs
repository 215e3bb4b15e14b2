//! Published coverage and length values for the built-in studies.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use blocktail::distributions::HeavyTailModel;
use blocktail::likelihood::Method;
use blocktail::montecarlo::Scheme;

const TABLE_CSV: &str = include_str!("../../../data/reference_tables.csv");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quantity {
    Coverage,
    Length,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReferenceValue {
    /// 1 and 2 are scheme 1 coverage and length, 3 and 4 scheme 2.
    pub table: u8,
    pub scheme: String,
    pub model: HeavyTailModel,
    pub k: usize,
    pub method: Method,
    pub quantity: Quantity,
    pub value: f64,
}

#[derive(Deserialize)]
struct Raw {
    table: u8,
    scheme: String,
    model: String,
    k: usize,
    method: String,
    quantity: Quantity,
    value: f64,
}

/// Every published value, in file order.
pub fn reference_values() -> &'static [ReferenceValue] {
    static VALUES: OnceLock<Vec<ReferenceValue>> = OnceLock::new();
    VALUES.get_or_init(|| {
        csv::Reader::from_reader(TABLE_CSV.as_bytes())
            .deserialize::<Raw>()
            .map(|r| {
                let r = r.expect("embedded reference table is well formed");
                ReferenceValue {
                    table: r.table,
                    scheme: r.scheme,
                    model: r.model.parse().expect("embedded model spec"),
                    k: r.k,
                    method: r.method.parse().expect("embedded method"),
                    quantity: r.quantity,
                    value: r.value,
                }
            })
            .collect()
    })
}

pub fn lookup(scheme: &Scheme, model: &HeavyTailModel, k: usize, method: Method, quantity: Quantity) -> Option<f64> {
    reference_values()
        .iter()
        .find(|v| {
            v.scheme == scheme.name() && v.model == *model && v.k == k && v.method == method && v.quantity == quantity
        })
        .map(|v| v.value)
}
