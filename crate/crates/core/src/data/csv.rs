use std::io::Read;
use std::path::Path;

use ndarray::Array2;

use super::{DataError, Dataset, Encoding, Role, Schema};

pub fn load_csv(path: &Path, schema: &Schema) -> Result<Dataset, DataError> {
    let file = std::fs::File::open(path).map_err(|e| DataError::Io(format!("{}: {e}", path.display())))?;
    parse_csv(file, schema)
}

fn is_missing(cell: &str) -> bool {
    cell.is_empty() || cell == "?"
}

/// Reads comma-separated rows with a header. Columns not in the schema are
/// ignored; rows with a missing cell (empty or `?`) in a schema column are
/// dropped. Values are not standardized.
pub fn parse_csv<R: Read>(reader: R, schema: &Schema) -> Result<Dataset, DataError> {
    schema.validate()?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(|e| DataError::Io(e.to_string()))?.clone();
    let index: Vec<usize> = schema
        .columns
        .iter()
        .map(|c| {
            header
                .iter()
                .position(|h| h == c.name)
                .ok_or_else(|| DataError::MissingColumn(c.name.clone()))
        })
        .collect::<Result<_, _>>()?;

    let width = schema.feature_width();
    let mut x = Vec::new();
    let mut a = Vec::new();
    let mut y = Vec::new();
    let mut dropped = 0;
    for (k, rec) in rdr.records().enumerate() {
        let line = k + 2;
        let rec = rec.map_err(|e| DataError::Io(format!("line {line}: {e}")))?;
        let cells: Vec<&str> = index.iter().map(|&i| rec.get(i).unwrap_or("")).collect();
        if cells.iter().any(|c| is_missing(c)) {
            dropped += 1;
            continue;
        }
        let mut row = Vec::with_capacity(width);
        for (c, raw) in schema.columns.iter().zip(&cells) {
            let level = || {
                c.level_of(raw).ok_or_else(|| DataError::UnknownLevel {
                    column: c.name.clone(),
                    value: raw.to_string(),
                    line,
                })
            };
            let number = || {
                raw.parse::<f64>().map_err(|_| DataError::Parse {
                    column: c.name.clone(),
                    value: raw.to_string(),
                    line,
                })
            };
            match (c.role, c.encoding) {
                (Role::Sensitive, _) => a.push(level()?),
                (Role::Label, Encoding::Continuous) => y.push(number()?),
                (Role::Label, _) => y.push(level()? as f64),
                (Role::Feature, Encoding::Continuous) => row.push(number()?),
                (Role::Feature, Encoding::Binary) => row.push(level()? as f64),
                (Role::Feature, Encoding::Categorical) => {
                    let l = level()?;
                    row.extend((0..c.levels.len()).map(|j| if j == l { 1.0 } else { 0.0 }));
                }
            }
        }
        x.extend(row);
    }
    if dropped > 0 {
        log::info!("dropped {dropped} rows with missing values");
    }
    if a.is_empty() {
        return Err(DataError::Empty);
    }
    let n = a.len();
    let x = Array2::from_shape_vec((n, width), x).expect("row widths follow the schema");
    let mut d = Dataset::from_parts(schema.clone(), x, a, y, None)?;
    d.dropped = dropped;
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> Schema {
        Schema::parse(
            r#"
format = 1
[[column]]
name = "c"
role = "feature"
encoding = "categorical"
levels = ["x", "y", "z"]
group = "beta"
[[column]]
name = "s"
role = "sensitive"
encoding = "binary"
[[column]]
name = "t"
role = "label"
encoding = "binary"
levels = ["<=50K", ">50K"]
"#,
        )
        .unwrap()
    }

    #[test]
    fn one_hot_block_of_three() {
        let d = parse_csv("c,s,t,extra\nx,0,<=50K,9\nz,1,>50K,9\ny,1,<=50K,9\n".as_bytes(), &schema()).unwrap();
        assert_eq!(d.feature_dim(), 3);
        assert_eq!(d.x.row(1).to_vec(), vec![0.0, 0.0, 1.0]);
        assert_eq!(d.a, vec![0, 1, 1]);
        assert_eq!(d.y, vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn unknown_level_reports_line() {
        let err = parse_csv("c,s,t\nx,0,<=50K\nw,1,>50K\n".as_bytes(), &schema()).unwrap_err();
        assert_eq!(
            err,
            DataError::UnknownLevel {
                column: "c".into(),
                value: "w".into(),
                line: 3
            }
        );
    }

    #[test]
    fn missing_cells_drop_rows() {
        let d = parse_csv("c,s,t\nx, ?,<=50K\nz,1,>50K\n,1,>50K\n".as_bytes(), &schema()).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.dropped, 2);
    }

    #[test]
    fn missing_column_is_named() {
        let err = parse_csv("c,t\nx,<=50K\n".as_bytes(), &schema()).unwrap_err();
        assert_eq!(err, DataError::MissingColumn("s".into()));
    }
}
