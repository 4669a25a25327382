#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tabdisc_core::corpus::{IngestReport, Table, TableCollection};

const WORDS: [&str; 16] = [
    "alpha", "bravo", "delta", "echo", "golf", "hotel", "india", "kilo", "lima", "mike", "oscar", "papa",
    "romeo", "sierra", "tango", "victor",
];

pub fn table(id: &str, title: &str, names: &[&str], rows: Vec<Vec<String>>) -> Table {
    let names: Vec<String> = names.iter().map(|s| s.to_string()).collect();
    Table::from_raw(id, title, &names, rows, &mut IngestReport::default())
}

/// Collection of text tables with unique cells; every table has a title.
pub fn text_collection(n_tables: usize, n_rows: usize, n_cols: usize) -> TableCollection {
    let tables = (0..n_tables).map(|t| {
        let names: Vec<String> = (0..n_cols).map(|c| format!("col{c}")).collect();
        let rows = (0..n_rows)
            .map(|r| (0..n_cols).map(|c| format!("{} {t}x{r}x{c}", WORDS[(t + r + c) % 16])).collect())
            .collect();
        Table::from_raw(format!("t{t:03}"), &format!("title {t}"), &names, rows, &mut IngestReport::default())
    });
    TableCollection::from_tables(tables).unwrap()
}

/// Mixed collection: some numeric columns, some unnamed columns, occasional
/// empty and overlong cells, some tables without a title.
pub fn mixed_collection(n_tables: usize, seed: u64) -> TableCollection {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tables: Vec<Table> = (0..n_tables)
        .map(|t| {
            let n_cols = rng.random_range(2..=6);
            let numeric: Vec<bool> = (0..n_cols).map(|_| rng.random_bool(0.4)).collect();
            let names: Vec<String> = (0..n_cols)
                .map(|c| if c > 0 && rng.random_bool(0.15) { String::new() } else { format!("field {c}") })
                .collect();
            let n_rows = rng.random_range(3..=12);
            let rows = (0..n_rows)
                .map(|r| {
                    (0..n_cols)
                        .map(|c| {
                            let roll: f64 = rng.random();
                            if roll < 0.05 {
                                String::new()
                            } else if roll < 0.08 {
                                vec!["long"; 40].join(" ")
                            } else if numeric[c] {
                                format!("{}", rng.random_range(0..1000))
                            } else {
                                format!("{} {}", WORDS[rng.random_range(0..16)], r)
                            }
                        })
                        .collect()
                })
                .collect();
            let title = if t % 4 == 3 { String::new() } else { format!("table number {t}") };
            Table::from_raw(format!("m{t:03}"), &title, &names, rows, &mut IngestReport::default())
        })
        .collect();
    TableCollection::from_tables(tables).unwrap()
}
