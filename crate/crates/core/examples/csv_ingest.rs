//! Load a CSV with gaps, hold out complete rows, and mask some more entries.

use covsparse::data::{inject_missingness, load_csv, split_train_test};

const CSV: &str = "\
age,bmi,bp,glucose,outcome
51,27.1,NA,5.4,1.9
63,,88,6.1,2.7
45,22.5,79,4.9,1.1
38,24.0,81,5.0,1.4
70,30.2,95,NaN,3.3
56,26.8,90,5.8,2.2
49,23.9,84,5.1,NA
60,28.4,92,6.0,2.6
";

fn main() -> covsparse::Result<()> {
    let path = std::env::temp_dir().join("covsparse_ingest_example.csv");
    std::fs::write(&path, CSV).map_err(|e| covsparse::Error::Io {
        path: path.clone(),
        source: e,
    })?;

    let d = load_csv(&path, "outcome", true)?;
    println!("features {:?}, label {:?}", d.feature_names, d.label_name);
    println!(
        "{} rows kept, {} dropped for a missing label, {:.0}% of design observed",
        d.train_rows(),
        d.dropped_label_rows,
        100.0 * d.problem.design.observed_fraction()
    );

    let split = split_train_test(&d, 0.3, 1)?;
    println!(
        "train rows {}, complete holdout rows {}",
        split.train_rows(),
        split.test_rows()
    );

    let masked = inject_missingness(&split, 0.25, 1)?;
    println!(
        "after injecting 25% missingness: {:.0}% observed",
        100.0 * masked.problem.design.observed_fraction()
    );
    println!("{}", masked.problem.design.to_nan_filled());
    Ok(())
}
