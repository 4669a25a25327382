#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tabdisc_model::relevance::{Group, Instance, QuestionBatch};

/// Original instance plus one variant per triple whose table is restricted
/// to that triple.
pub fn with_variants(original: Instance) -> Vec<Instance> {
    let mut out = vec![original.clone()];
    for (gi, g) in original.groups.iter().enumerate() {
        for &r in &g.rows {
            let mut v = original.clone();
            v.groups[gi].rows = vec![r];
            out.push(v);
        }
    }
    out
}

/// Random question: `n_rows` feature rows split into tables of 1-3 triples,
/// the first table positive.
pub fn random_batch(feature_dim: usize, n_rows: usize, seed: u64, augment: bool) -> QuestionBatch {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let features: Vec<Vec<f32>> = (0..n_rows)
        .map(|_| (0..feature_dim).map(|_| rng.random_range(-1.0f32..1.0)).collect())
        .collect();
    let mut groups = Vec::new();
    let mut next = 0;
    while next < n_rows {
        let size = rng.random_range(1..=3).min(n_rows - next);
        groups.push(Group {
            table_id: format!("t{}", groups.len()),
            rows: (next..next + size).collect(),
            label: groups.is_empty(),
        });
        next += size;
    }
    let original = Instance { groups };
    QuestionBatch {
        question_id: format!("q{seed}"),
        features,
        instances: if augment { with_variants(original) } else { vec![original] },
    }
}

/// Two tables of two triples each; positive triples carry +1 in feature 0,
/// negative ones −1, the remaining features are noise. Which table id is
/// positive alternates.
pub fn separable_set(feature_dim: usize, n: usize, seed: u64) -> Vec<QuestionBatch> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let mut features = Vec::new();
            for sign in [1.0f32, 1.0, -1.0, -1.0] {
                let mut row: Vec<f32> = (0..feature_dim).map(|_| rng.random_range(-0.3f32..0.3)).collect();
                row[0] = sign;
                features.push(row);
            }
            let (pos, neg) = if i % 2 == 0 { ("A", "B") } else { ("B", "A") };
            let mut groups = vec![
                Group { table_id: pos.into(), rows: vec![0, 1], label: true },
                Group { table_id: neg.into(), rows: vec![2, 3], label: false },
            ];
            if i % 3 == 0 {
                groups.reverse();
            }
            QuestionBatch {
                question_id: format!("q{i}"),
                features,
                instances: vec![Instance { groups }],
            }
        })
        .collect()
}

/// `|a - n| / max(|a|, |n|, floor)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}
