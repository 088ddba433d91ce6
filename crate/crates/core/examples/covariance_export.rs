//! Write the feature covariance of a completed design in the text format and
//! read it back.

use covsparse::bench::export_covariance_matrix;
use covsparse::CovarianceMatrix;
use nalgebra::DMatrix;

fn main() -> covsparse::Result<()> {
    let completed = DMatrix::from_row_slice(
        4,
        3,
        &[1.0, 2.0, 0.5, 2.0, 4.1, -1.0, 3.0, 5.9, 0.0, 4.0, 8.0, 1.5],
    );
    let path = std::env::temp_dir().join("covsparse_covariance_example.txt");
    let c = export_covariance_matrix(&completed, &path)?;
    print!("{}", std::fs::read_to_string(&path).unwrap_or_default());

    let back = CovarianceMatrix::read(&path)?;
    let worst = (back.entries() - c.entries()).abs().max();
    println!("round trip max deviation {worst:.1e}");
    Ok(())
}
