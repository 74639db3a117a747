//! Desk-scale stand-ins for the census-income and card-fraud datasets,
//! generated from fixed latent models so the protocol runs without the
//! original files.

use std::sync::Arc;

use rand::Rng as _;
use rand_distr::{Distribution, LogNormal, Normal, StandardNormal};

use crate::data::{ColumnSchema, Dataset, Schema};
use crate::error::{Error, Result};
use crate::seed::{self, Rng};

pub const ADULT_ROWS: usize = 48_842;
pub const CREDIT_ROWS: usize = 284_807;
/// Fraud share of the raw card-fraud data.
pub const CREDIT_FRAUD_RATE: f64 = 0.0017;

const WORKCLASS: [&str; 7] = [
    "Private",
    "Self-emp-not-inc",
    "Local-gov",
    "State-gov",
    "Self-emp-inc",
    "Federal-gov",
    "Without-pay",
];
const EDUCATION: [&str; 16] = [
    "Preschool",
    "1st-4th",
    "5th-6th",
    "7th-8th",
    "9th",
    "10th",
    "11th",
    "12th",
    "HS-grad",
    "Some-college",
    "Assoc-voc",
    "Assoc-acdm",
    "Bachelors",
    "Masters",
    "Prof-school",
    "Doctorate",
];
const EDUCATION_WEIGHTS: [f64; 16] = [
    0.2, 0.5, 1.0, 2.0, 1.6, 2.8, 3.7, 1.3, 32.3, 22.3, 4.2, 3.3, 16.4, 5.4, 1.7, 1.2,
];
const MARITAL: [&str; 7] = [
    "Married-civ-spouse",
    "Never-married",
    "Divorced",
    "Separated",
    "Widowed",
    "Married-spouse-absent",
    "Married-AF-spouse",
];
const MARITAL_WEIGHTS: [f64; 7] = [45.8, 33.0, 13.6, 3.1, 3.1, 1.3, 0.1];
const OCCUPATION: [&str; 14] = [
    "Prof-specialty",
    "Craft-repair",
    "Exec-managerial",
    "Adm-clerical",
    "Sales",
    "Other-service",
    "Machine-op-inspct",
    "Transport-moving",
    "Handlers-cleaners",
    "Farming-fishing",
    "Tech-support",
    "Protective-serv",
    "Priv-house-serv",
    "Armed-Forces",
];
const OCCUPATION_WEIGHTS: [f64; 14] = [
    13.4, 13.3, 13.2, 12.2, 11.9, 10.7, 6.5, 5.1, 4.5, 3.2, 3.1, 2.1, 0.5, 0.1,
];
const OCCUPATION_EFFECT: [f64; 14] = [
    0.9, 0.1, 1.0, -0.1, 0.3, -1.2, -0.4, -0.1, -0.9, -0.6, 0.5, 0.5, -1.8, 0.0,
];
const RELATIONSHIP: [&str; 6] = [
    "Husband",
    "Not-in-family",
    "Own-child",
    "Unmarried",
    "Wife",
    "Other-relative",
];
const RACE: [&str; 5] = ["White", "Black", "Asian-Pac-Islander", "Amer-Indian-Eskimo", "Other"];
const RACE_WEIGHTS: [f64; 5] = [85.5, 9.6, 3.1, 1.0, 0.8];
const COUNTRY: [&str; 8] = [
    "United-States",
    "Mexico",
    "Philippines",
    "Germany",
    "Canada",
    "India",
    "El-Salvador",
    "Other",
];
const COUNTRY_WEIGHTS: [f64; 8] = [89.7, 2.0, 0.6, 0.4, 0.4, 0.3, 0.3, 6.3];

fn pick(weights: &[f64], rng: &mut Rng) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        if u < w {
            return i;
        }
        u -= w;
    }
    weights.len() - 1
}

pub fn adult_schema() -> Arc<Schema> {
    let cols = vec![
        ColumnSchema::continuous("age"),
        ColumnSchema::categorical("workclass", WORKCLASS),
        ColumnSchema::continuous("fnlwgt"),
        ColumnSchema::categorical("education", EDUCATION),
        ColumnSchema::continuous("education_num"),
        ColumnSchema::categorical("marital_status", MARITAL),
        ColumnSchema::categorical("occupation", OCCUPATION),
        ColumnSchema::categorical("relationship", RELATIONSHIP),
        ColumnSchema::categorical("race", RACE),
        ColumnSchema::categorical("sex", ["Male", "Female"]),
        ColumnSchema::continuous("capital_gain"),
        ColumnSchema::continuous("capital_loss"),
        ColumnSchema::continuous("hours_per_week"),
        ColumnSchema::categorical("native_country", COUNTRY),
        ColumnSchema::categorical("income", ["<=50K", ">50K"]),
    ];
    Arc::new(Schema::new(cols, "income").expect("static schema"))
}

/// Census-style mixed-type rows: 6 continuous, 2 binary (label included)
/// and 7 multiclass columns, roughly a quarter positive.
pub fn adult(n: usize, seed: u64) -> Dataset {
    let mut rng = seed::derived_rng(seed, &[0xad]);
    let age_dist = LogNormal::<f64>::new(3.57, 0.3).expect("static");
    let fnlwgt_dist = LogNormal::<f64>::new(12.0, 0.55).expect("static");
    let gain_dist = LogNormal::<f64>::new(8.6, 0.9).expect("static");
    let loss_dist = Normal::<f64>::new(1870.0, 360.0).expect("static");
    let mut cells = Vec::with_capacity(n * 15);
    for _ in 0..n {
        let age = age_dist.sample(&mut rng).clamp(17.0, 90.0).round();
        let education = pick(&EDUCATION_WEIGHTS, &mut rng);
        let education_num = (education + 1) as f64;
        let male = rng.random::<f64>() < 0.67;
        let mut marital = pick(&MARITAL_WEIGHTS, &mut rng);
        if age < 23.0 && rng.random::<f64>() < 0.8 {
            marital = 1;
        }
        let married = matches!(marital, 0 | 6);
        let relationship = if married {
            if male {
                0
            } else {
                4
            }
        } else if age < 25.0 && rng.random::<f64>() < 0.7 {
            2
        } else {
            [1, 1, 1, 3, 3, 5][rng.random_range(0..6)]
        };
        let mut occ_w = OCCUPATION_WEIGHTS;
        if education >= 12 {
            occ_w[0] *= 4.0;
            occ_w[2] *= 2.5;
        }
        let occupation = pick(&occ_w, &mut rng);
        let workclass = pick(&[69.7, 7.9, 6.4, 4.1, 3.5, 2.9, 0.1], &mut rng);
        let race = pick(&RACE_WEIGHTS, &mut rng);
        let country = pick(&COUNTRY_WEIGHTS, &mut rng);
        let fnlwgt = fnlwgt_dist.sample(&mut rng).round();
        let z: f64 = StandardNormal.sample(&mut rng);
        let hours = (40.0 + 11.0 * z + if male { 3.0 } else { -3.0 }).clamp(1.0, 99.0).round();

        let latent = -4.0
            + 0.8 * (education_num - 10.0)
            + 3.2 * married as u8 as f64
            + 0.05 * (hours - 40.0)
            + 0.07 * (age - 38.0)
            - 0.003 * (age - 38.0).powi(2)
            + 1.5 * OCCUPATION_EFFECT[occupation]
            + 0.4 * male as u8 as f64
            + if workclass == 4 { 1.0 } else { 0.0 };
        let p = 1.0 / (1.0 + (-latent).exp());
        let gain = if rng.random::<f64>() < 0.03 + 0.12 * p {
            gain_dist.sample(&mut rng).round()
        } else {
            0.0
        };
        let loss = if rng.random::<f64>() < 0.02 + 0.05 * p {
            loss_dist.sample(&mut rng).max(150.0).round()
        } else {
            0.0
        };
        let latent = latent + if gain > 7000.0 { 3.5 } else { 0.0 } + if loss > 1800.0 { 1.0 } else { 0.0 };
        let y = rng.random::<f64>() < 1.0 / (1.0 + (-latent).exp());
        cells.extend([
            age,
            workclass as f64,
            fnlwgt,
            education as f64,
            education_num,
            marital as f64,
            occupation as f64,
            relationship as f64,
            race as f64,
            (!male) as u8 as f64,
            gain,
            loss,
            hours,
            country as f64,
            y as u8 as f64,
        ]);
    }
    Dataset::new(adult_schema(), cells).expect("generator respects schema")
}

pub fn credit_schema() -> Arc<Schema> {
    let mut cols = vec![ColumnSchema::continuous("time")];
    cols.extend((1..=10).map(|i| ColumnSchema::continuous(format!("v{i}"))));
    cols.push(ColumnSchema::continuous("amount"));
    cols.push(ColumnSchema::categorical("class", ["0", "1"]));
    Arc::new(Schema::new(cols, "class").expect("static schema"))
}

/// Card-transaction-style rows with all-continuous features and a rare
/// positive class at `fraud_rate`.
pub fn credit(n: usize, fraud_rate: f64, seed: u64) -> Result<Dataset> {
    if !(0.0..1.0).contains(&fraud_rate) {
        return Err(Error::config(format!("fraud rate {fraud_rate} outside [0, 1)")));
    }
    let mut rng = seed::derived_rng(seed, &[0xc7]);
    let amount_legit = LogNormal::<f64>::new(3.5, 1.3).expect("static");
    let amount_fraud = LogNormal::<f64>::new(3.0, 1.8).expect("static");
    // fraud rows are shifted along a few components and more dispersed
    const SHIFT: [f64; 10] = [-2.5, 2.0, -3.0, 2.5, -1.0, -0.8, -2.2, 0.4, -1.3, -2.0];
    let mut cells = Vec::with_capacity(n * 13);
    for _ in 0..n {
        let fraud = rng.random::<f64>() < fraud_rate;
        let time = rng.random_range(0.0..172_800.0f64).round();
        let common: f64 = StandardNormal.sample(&mut rng);
        cells.push(time);
        for s in SHIFT {
            let z: f64 = StandardNormal.sample(&mut rng);
            let v = 0.3 * common + 0.95 * z;
            cells.push(if fraud { 1.8 * v + s } else { v });
        }
        let amount = if fraud {
            amount_fraud.sample(&mut rng)
        } else {
            amount_legit.sample(&mut rng)
        };
        cells.push((amount * 100.0).round() / 100.0);
        cells.push(fraud as u8 as f64);
    }
    Dataset::new(credit_schema(), cells)
}

/// Resolves a bundled dataset by name (`adult` or `credit`), at its
/// original row count unless `n` is given.
pub fn by_name(name: &str, n: Option<usize>, seed: u64) -> Result<Dataset> {
    match name {
        "adult" => Ok(adult(n.unwrap_or(ADULT_ROWS), seed)),
        "credit" | "credit-imbalanced" => credit(n.unwrap_or(CREDIT_ROWS), CREDIT_FRAUD_RATE, seed),
        other => Err(Error::config(format!(
            "unknown bundled dataset `{other}` (expected adult or credit)"
        ))),
    }
}
