//! Seeded synthetic table collections.
//!
//! Each table has 4 to 8 named columns and 10 to 30 rows. The first column
//! holds a distinct name per row, roughly a third of the others are numeric
//! and the rest draw from a small per-column vocabulary, so values repeat
//! inside a table but rarely across tables. Titles are distinct.

use std::collections::BTreeSet;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tabdisc_core::corpus::{IngestReport, Table, TableCollection};

use crate::Result;

pub const MIN_COLUMNS: usize = 4;
pub const MAX_COLUMNS: usize = 8;
pub const MIN_ROWS: usize = 10;
pub const MAX_ROWS: usize = 30;

const ONSETS: [&str; 18] = [
    "b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "st", "tr", "gl",
];
const VOWELS: [&str; 6] = ["a", "e", "i", "o", "u", "ai"];

const COLUMN_NAMES: [&str; 36] = [
    "Owner", "District", "Category", "Status", "Region", "Supplier", "Color", "Material", "Grade",
    "Manager", "Sector", "Route", "Venue", "Genre", "Brand", "Habitat", "Origin", "Format",
    "Capacity", "Founded", "Budget", "Members", "Length", "Weight", "Rating", "Stock", "Visitors",
    "Elevation", "Score", "Output", "Distance", "Seats", "Revenue", "Height", "Staff", "Units",
];
const NUMERIC_FROM: usize = 18;

const TITLE_FIRST: [&str; 16] = [
    "Northern", "Coastal", "Royal", "Central", "Eastern", "Historic", "Municipal", "Regional",
    "National", "Western", "Upper", "Lower", "Grand", "Old", "New", "Southern",
];
const TITLE_SECOND: [&str; 16] = [
    "Railway", "Library", "Orchard", "Harbor", "Museum", "Brewery", "Stadium", "Festival",
    "Observatory", "Garden", "Shipyard", "Theater", "Market", "Vineyard", "Airfield", "Quarry",
];
const TITLE_THIRD: [&str; 8] = [
    "Registry", "Inventory", "Directory", "Records", "Survey", "Census", "Catalog", "Roster",
];

fn pseudo_word(rng: &mut impl Rng, syllables: usize) -> String {
    (0..syllables)
        .map(|_| {
            let onset = ONSETS.choose(rng).expect("non-empty");
            let vowel = VOWELS.choose(rng).expect("non-empty");
            format!("{onset}{vowel}")
        })
        .collect()
}

fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    chars
        .next()
        .map(|c| c.to_uppercase().chain(chars).collect())
        .unwrap_or_default()
}

fn distinct_title(rng: &mut impl Rng, used: &mut BTreeSet<String>) -> String {
    for _ in 0..64 {
        let title = format!(
            "{} {} {}",
            TITLE_FIRST.choose(rng).expect("non-empty"),
            TITLE_SECOND.choose(rng).expect("non-empty"),
            TITLE_THIRD.choose(rng).expect("non-empty"),
        );
        if used.insert(title.clone()) {
            return title;
        }
    }
    loop {
        let title = format!("{} {}", capitalize(&pseudo_word(rng, 3)), TITLE_THIRD.choose(rng).expect("non-empty"));
        if used.insert(title.clone()) {
            return title;
        }
    }
}

enum ColumnKind {
    Names,
    Numeric { low: u32, span: u32 },
    Vocabulary(Vec<String>),
}

fn column_kind(rng: &mut impl Rng, name_index: usize) -> ColumnKind {
    if name_index >= NUMERIC_FROM {
        let low = rng.random_range(1..5000);
        ColumnKind::Numeric {
            low,
            span: rng.random_range(200..90_000),
        }
    } else {
        let size = rng.random_range(3..=8);
        let mut words = BTreeSet::new();
        while words.len() < size {
            words.insert(pseudo_word(rng, 2));
        }
        ColumnKind::Vocabulary(words.into_iter().collect())
    }
}

fn synthetic_table(rng: &mut impl Rng, id: String, title: &str) -> Table {
    let n_cols = rng.random_range(MIN_COLUMNS..=MAX_COLUMNS);
    let n_rows = rng.random_range(MIN_ROWS..=MAX_ROWS);
    let mut picks: Vec<usize> = (0..COLUMN_NAMES.len()).collect();
    picks.shuffle(rng);
    picks.truncate(n_cols - 1);
    let mut names = vec!["Name".to_owned()];
    let mut kinds = vec![ColumnKind::Names];
    for &i in &picks {
        names.push(COLUMN_NAMES[i].to_owned());
        kinds.push(column_kind(rng, i));
    }
    let mut entities = BTreeSet::new();
    let mut rows = Vec::with_capacity(n_rows);
    for _ in 0..n_rows {
        let row = kinds
            .iter()
            .map(|kind| match kind {
                ColumnKind::Names => loop {
                    let name = capitalize(&pseudo_word(rng, 3));
                    if entities.insert(name.clone()) {
                        break name;
                    }
                },
                ColumnKind::Numeric { low, span } => (low + rng.random_range(0..*span)).to_string(),
                ColumnKind::Vocabulary(words) => words.choose(rng).expect("non-empty").clone(),
            })
            .collect();
        rows.push(row);
    }
    Table::from_raw(id, title, &names, rows, &mut IngestReport::default())
}

/// `n` tables with ids `syn0000`, `syn0001`, ...
pub fn synthetic_collection(n: usize, seed: u64) -> Result<TableCollection> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut used = BTreeSet::new();
    let tables: Vec<Table> = (0..n)
        .map(|i| {
            let title = distinct_title(&mut rng, &mut used);
            synthetic_table(&mut rng, format!("syn{i:04}"), &title)
        })
        .collect();
    Ok(TableCollection::from_tables(tables)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_and_titles() {
        let c = synthetic_collection(100, 3).unwrap();
        assert_eq!(c.len(), 100);
        let titles: BTreeSet<&str> = c.tables().map(|t| t.title.as_str()).collect();
        assert_eq!(titles.len(), 100);
        for t in c.tables() {
            assert!((MIN_COLUMNS..=MAX_COLUMNS).contains(&t.n_cols()), "{}", t.id);
            assert!((MIN_ROWS..=MAX_ROWS).contains(&t.n_rows()), "{}", t.id);
            assert!(t.columns.iter().all(|c| c.is_named()));
            let names: BTreeSet<&str> = t.column_cells(0).collect();
            assert_eq!(names.len(), t.n_rows());
        }
    }

    #[test]
    fn seeded() {
        assert_eq!(synthetic_collection(10, 1).unwrap(), synthetic_collection(10, 1).unwrap());
        assert_ne!(synthetic_collection(10, 1).unwrap(), synthetic_collection(10, 2).unwrap());
    }
}
