use std::sync::Arc;

use goatmix::data::{ColumnSchema, Dataset, Schema};
use goatmix::eval::{self, gbdt, GbdtConfig};
use goatmix::seed;
use goatmix::stats::auc;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

fn schema(n_features: usize) -> Arc<Schema> {
    let mut cols: Vec<ColumnSchema> = (0..n_features).map(|i| ColumnSchema::continuous(format!("x{i}"))).collect();
    cols.push(ColumnSchema::categorical("y", ["0", "1"]));
    Arc::new(Schema::new(cols, "y").unwrap())
}

#[test]
fn separable_data_is_ranked_perfectly() {
    let mut rng = seed::rng(1);
    let mut cells = Vec::new();
    for _ in 0..200 {
        let (a, b): (f64, f64) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let y = (a + 2.0 * b > 0.1) as u8 as f64;
        cells.extend([a, b, y]);
    }
    let d = Dataset::new(schema(2), cells).unwrap();
    let model = eval::train_classifier(&d, &GbdtConfig::default()).unwrap();
    let r = eval::score(&model, &d).unwrap();
    assert_eq!(r.auc, 1.0);
    assert_eq!(r.loss, -r.auc);
    assert_eq!(r.n_pos + r.n_neg, 200);
}

#[test]
fn independent_labels_score_near_chance() {
    let mut rng = seed::rng(2);
    let mut make = |n: usize| {
        let mut cells = Vec::new();
        for _ in 0..n {
            for _ in 0..3 {
                let z: f64 = StandardNormal.sample(&mut rng);
                cells.push(z);
            }
            cells.push(rng.random_range(0..2) as f64);
        }
        Dataset::new(schema(3), cells).unwrap()
    };
    let (train, val) = (make(2000), make(2000));
    let r = eval::evaluate(&train, &val, &GbdtConfig::default()).unwrap();
    assert!((0.45..=0.55).contains(&r.auc), "auc {}", r.auc);
}

#[test]
fn training_loss_never_increases() {
    let mut rng = seed::rng(3);
    let mut cells = Vec::new();
    for _ in 0..1500 {
        let a: f64 = StandardNormal.sample(&mut rng);
        let b: f64 = StandardNormal.sample(&mut rng);
        let p = 1.0 / (1.0 + (-(a * b + 0.5 * a)).exp());
        cells.extend([a, b, (rng.random::<f64>() < p) as u8 as f64]);
    }
    let d = Dataset::new(schema(2), cells).unwrap();
    let labels = d.labels();
    let mut losses = Vec::new();
    gbdt::train_matrix_with(&d.features(), &labels, &GbdtConfig::default(), |_, m| {
        losses.push(gbdt::logistic_loss(m, &labels));
    })
    .unwrap();
    assert_eq!(losses.len(), 100);
    for w in losses.windows(2) {
        assert!(w[1] <= w[0] + 1e-12, "{} -> {}", w[0], w[1]);
    }
}

#[test]
fn single_class_training_maps_to_half() {
    let mut rng = seed::rng(4);
    let mut one_class = Vec::new();
    let mut both = Vec::new();
    for i in 0..100 {
        let x: f64 = rng.random();
        one_class.extend([x, 0.0]);
        both.extend([x, (i % 2) as f64]);
    }
    let train = Dataset::new(schema(1), one_class).unwrap();
    let val = Dataset::new(schema(1), both).unwrap();
    assert!(matches!(
        eval::train_classifier(&train, &GbdtConfig::default()),
        Err(goatmix::Error::SingleClass)
    ));
    let r = eval::evaluate(&train, &val, &GbdtConfig::default()).unwrap();
    assert!(r.degenerate);
    assert_eq!(r.auc, 0.5);
    assert_eq!(r.loss, -0.5);
    let empty = Dataset::empty(schema(1));
    assert!(eval::evaluate(&empty, &val, &GbdtConfig::default()).unwrap().degenerate);
}

#[test]
fn training_is_deterministic_and_row_order_preserving() {
    let mut rng = seed::rng(5);
    let mut cells = Vec::new();
    for _ in 0..600 {
        let a: f64 = StandardNormal.sample(&mut rng);
        cells.extend([a, a * a, (a > 0.3) as u8 as f64]);
    }
    let d = Dataset::new(schema(2), cells).unwrap();
    let m1 = eval::train_classifier(&d, &GbdtConfig::default()).unwrap();
    let m2 = eval::train_classifier(&d, &GbdtConfig::default()).unwrap();
    assert_eq!(m1, m2);
    let x = d.features();
    let p = eval::predict_proba(&m1, &x).unwrap();
    assert!(p.iter().all(|&s| s > 0.0 && s < 1.0));
    let rev: Vec<usize> = (0..d.n_rows()).rev().collect();
    let p_rev = eval::predict_proba(&m1, &d.select_rows(&rev).features()).unwrap();
    assert!(p.iter().rev().eq(p_rev.iter()));
    assert_eq!(auc(&p, &d.labels()).unwrap(), 1.0);
}
