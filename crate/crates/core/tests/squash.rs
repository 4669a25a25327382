use proptest::prelude::*;
use tabdisc_core::index::{squash, two_round, RetrievalParams, RetrievalResult};

fn ranked(tables: &[usize]) -> Vec<RetrievalResult> {
    tables
        .iter()
        .enumerate()
        .map(|(i, t)| RetrievalResult {
            triple_id: 1000 + i as u64,
            table_id: format!("T{t}"),
            score: 100.0 - i as f64,
            rank: i,
        })
        .collect()
}

#[test]
fn worked_example() {
    let tables = [0, 0, 0, 1, 1, 1, 2, 2];
    let params = RetrievalParams { k_u: 4, k_t: 2, max_try_ku: 8, per_table_cap: 2 };
    let out = squash(&ranked(&tables), &params);
    let ids: Vec<u64> = out.iter().map(|r| r.triple_id).collect();
    assert_eq!(ids, vec![1000, 1001, 1003, 1004]);
}

#[test]
fn single_table_is_capped() {
    let params = RetrievalParams { k_u: 5, k_t: 2, max_try_ku: 20, per_table_cap: 3 };
    assert_eq!(squash(&ranked(&[0; 20]), &params).len(), 3);
    let params = RetrievalParams { k_u: 2, ..params };
    assert_eq!(squash(&ranked(&[0; 20]), &params).len(), 2);
}

proptest! {
    #[test]
    fn two_round_output_is_bounded_and_drawn_from_the_fetch(
        tables in proptest::collection::vec(0usize..12, 1..200),
        k_u in 1usize..30,
        k_t in 1usize..8,
        m in 1usize..5,
    ) {
        let all = ranked(&tables);
        let params = RetrievalParams { k_u, k_t, max_try_ku: all.len().max(k_u), per_table_cap: m };
        let out = two_round(|n| Ok(all.iter().take(n).cloned().collect()), &params).unwrap();
        prop_assert!(out.len() <= k_u);
        for (i, r) in out.iter().enumerate() {
            prop_assert!(all.iter().any(|a| a.triple_id == r.triple_id && a.table_id == r.table_id));
            prop_assert_eq!(r.rank, i);
            if i > 0 {
                prop_assert!(out[i - 1].score >= r.score);
            }
        }
    }
}
