#![allow(dead_code)]

use std::path::Path;

use tabdisc::PipelineConfig;

/// Small synthetic run that trains in a few seconds.
pub fn toy_config(out: &Path, trainer: &str, seed: u64) -> PipelineConfig {
    let text = format!(
        r#"
seed = {seed}
out_dir = "{out}"
trainer = "{trainer}"

[corpus]
source = "synthetic"
tables = 8

[encoder]
dim = 64

[retrieval]
k_u = 12
k_t = 3
max_try_ku = 60
per_table_cap = 3

[sqlgen]
initial = 90

[questions]
held_out = 20

[datasets]
count = 2
size = 25

[relevance]
proj_dim = 8
learning_rate = 0.05
max_epochs = 4
"#,
        out = out.display()
    );
    PipelineConfig::from_toml(&text).unwrap()
}
