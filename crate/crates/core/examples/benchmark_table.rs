//! A small paired benchmark from an inline config, rendered as a table.

use covsparse::bench::{emit_table, run_benchmark_config, BenchConfig};

const CONFIG: &str = r#"
[ladder]
lambda2_fraction = [0.2, 0.1, 0.05, 0.02]
lambda1 = 5.0
gamma = 0.5

[dataset.small]
source = "synthetic"
m = 60
n = 80
sparsity = 4
block_corr = 0.8
block_size = 4
miss_rate = 0.2
noise_sigma = 0.05
seed = 1
trials = 3
"#;

fn main() -> covsparse::Result<()> {
    let cfg = BenchConfig::parse(CONFIG).map_err(covsparse::Error::InvalidConfig)?;
    let report = run_benchmark_config(&cfg)?;
    let dir = std::env::temp_dir();
    report.write(dir.join("covsparse_example_report.jsonl"))?;
    let out = dir.join("covsparse_example_table.txt");
    emit_table(&report, &out)?;
    print!("{}", std::fs::read_to_string(&out).unwrap_or_default());
    Ok(())
}
