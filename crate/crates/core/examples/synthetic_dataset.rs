//! Generate a synthetic problem, save it as train/test CSVs plus metadata, and
//! load it back.

use covsparse::data::{generate_synthetic, load_saved_dataset, save_dataset};
use covsparse::SyntheticSpec;

fn main() -> covsparse::Result<()> {
    let spec = SyntheticSpec {
        block_corr: 0.6,
        block_size: 3,
        miss_rate: 0.15,
        noise_sigma: 0.1,
        seed: 5,
        ..SyntheticSpec::new(30, 9, 2)
    };
    let d = generate_synthetic(&spec)?;
    let dir = std::env::temp_dir().join("covsparse_synthetic_example");
    save_dataset(&d, &dir)?;
    for name in ["meta.txt", "train.csv"] {
        let text = std::fs::read_to_string(dir.join(name)).unwrap_or_default();
        println!("== {name}");
        for line in text.lines().take(5) {
            println!("{line}");
        }
    }
    let back = load_saved_dataset(&dir)?;
    println!(
        "reloaded {} train / {} test rows, {:.0}% observed",
        back.train_rows(),
        back.test_rows(),
        100.0 * back.problem.design.observed_fraction()
    );
    Ok(())
}
