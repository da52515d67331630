use std::path::Path;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Column, DataError, Dataset, Encoding, Exogenous, Group, Role, Schema};
use crate::scm::synthetic_scm;

pub const SYNTHETIC_N: usize = 3000;

/// `X` (continuous, beta), `A` (binary sensitive), `Y` (continuous label).
pub fn synthetic_schema() -> Schema {
    let col = |name: &str, role, encoding, group| Column {
        name: name.into(),
        role,
        encoding,
        levels: vec![],
        group,
    };
    Schema::new(vec![
        col("X", Role::Feature, Encoding::Continuous, Group::Beta),
        col("A", Role::Sensitive, Encoding::Binary, Group::None),
        col("Y", Role::Label, Encoding::Continuous, Group::None),
    ])
    .expect("static schema")
}

/// Draws `n` individuals from the simulation model. The exogenous block
/// holds `U_A, U1, U2`.
pub fn generate_synthetic(n: usize, seed: u64) -> Dataset {
    let scm = synthetic_scm();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = scm.graph();
    let idx = |name: &str| g.index_of(name).expect("node exists");
    let (ia, ix, iy) = (idx("A"), idx("X"), idx("Y"));
    let exo = scm.exogenous().to_vec();
    let mut x = Array2::zeros((n, 1));
    let mut u = Array2::zeros((n, exo.len()));
    let mut a = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let mut values = scm.sample_exogenous(&mut rng);
        scm.simulate_into(&mut values, &[]).expect("closed-form model");
        x[[i, 0]] = values[ix];
        a.push(values[ia] as usize);
        y.push(values[iy]);
        for (k, &e) in exo.iter().enumerate() {
            u[[i, k]] = values[e];
        }
    }
    let names = exo.iter().map(|&e| g.node(e).name.clone()).collect();
    Dataset::from_parts(synthetic_schema(), x, a, y, Some(Exogenous { names, values: u }))
        .expect("generator matches schema")
}

/// Writes `A,X,Y` to `path` and the exogenous block to
/// `<stem>.exogenous.csv` beside it. Returns the second path.
pub fn write_synthetic_csv(d: &Dataset, path: &Path) -> Result<std::path::PathBuf, DataError> {
    let io = |e: std::io::Error| DataError::Io(e.to_string());
    let mut main = String::from("A,X,Y\n");
    for i in 0..d.len() {
        main.push_str(&format!("{},{},{}\n", d.a[i], d.x[[i, 0]], d.y[i]));
    }
    std::fs::write(path, main).map_err(io)?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("synthetic");
    let exo_path = path.with_file_name(format!("{stem}.exogenous.csv"));
    if let Some(e) = &d.exogenous {
        let mut text = e.names.join(",");
        text.push('\n');
        for row in e.values.rows() {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            text.push_str(&cells.join(","));
            text.push('\n');
        }
        std::fs::write(&exo_path, text).map_err(io)?;
    }
    Ok(exo_path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_size_and_sensitive_rate() {
        let d = generate_synthetic(SYNTHETIC_N, 0);
        assert_eq!(d.len(), 3000);
        let rate = d.a.iter().sum::<usize>() as f64 / 3000.0;
        assert!((rate - 0.4).abs() < 0.03, "{rate}");
    }

    #[test]
    fn label_is_exact_function_of_x() {
        let d = generate_synthetic(500, 7);
        for i in 0..d.len() {
            let x = d.x[[i, 0]];
            assert_eq!(d.y[i], 0.2 * x * x + 1.2 * x + 0.2);
        }
    }

    #[test]
    fn deterministic_given_seed() {
        assert_eq!(generate_synthetic(100, 3), generate_synthetic(100, 3));
        assert_ne!(generate_synthetic(100, 3).x, generate_synthetic(100, 4).x);
    }

    #[test]
    fn csv_round_trip_through_loader() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("syn.csv");
        let d = generate_synthetic(20, 1);
        let exo = write_synthetic_csv(&d, &p).unwrap();
        assert!(exo.ends_with("syn.exogenous.csv"));
        let back = crate::data::load_csv(&p, &synthetic_schema()).unwrap();
        assert_eq!(back.x, d.x);
        assert_eq!(back.y, d.y);
        assert_eq!(back.a, d.a);
    }
}
