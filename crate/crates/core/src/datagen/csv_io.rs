//! Dataset CSV: header row, `feat_*` (or any other numeric) feature columns, a
//! `label` column in `{+1,-1}` or `{0,1}`, and optional `region` (`I`/`U`) and
//! `z` (`+1`/`-1`) oracle columns.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::types::{label_from_unit, FeatureVector, Label, LabeledSample, OracleSample, Region};

#[derive(Debug, Clone, PartialEq)]
pub struct CsvDataset {
    pub feature_names: Vec<String>,
    pub samples: Vec<LabeledSample>,
    pub regions: Option<Vec<Region>>,
    pub z: Option<Vec<Label>>,
}

impl CsvDataset {
    /// Oracle view; needs the `region` column. Without a `z` column the latent
    /// status is recorded as the region's posterior mode `g*(x)`.
    pub fn to_oracle(&self) -> Result<Vec<OracleSample>> {
        let regions = self
            .regions
            .as_ref()
            .ok_or_else(|| Error::MissingOracle("csv has no region column".into()))?;
        Ok(self
            .samples
            .iter()
            .zip(regions)
            .enumerate()
            .map(|(i, (s, r))| OracleSample {
                sample: s.clone(),
                z: self.z.as_ref().map_or(r.g_star(), |z| z[i]),
                region: *r,
            })
            .collect())
    }
}

pub fn load_feature_csv(path: impl AsRef<Path>) -> Result<CsvDataset> {
    read_feature_csv(File::open(path)?)
}

pub fn read_feature_csv<R: Read>(reader: R) -> Result<CsvDataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let label_col = headers
        .iter()
        .position(|h| h == "label")
        .ok_or_else(|| Error::CsvCell {
            row: 0,
            column: "label".into(),
            message: "missing label column".into(),
        })?;
    let region_col = headers.iter().position(|h| h == "region");
    let z_col = headers.iter().position(|h| h == "z");
    let feature_cols: Vec<usize> = (0..headers.len())
        .filter(|&c| c != label_col && Some(c) != region_col && Some(c) != z_col)
        .collect();
    if feature_cols.is_empty() {
        return Err(Error::CsvCell {
            row: 0,
            column: "*".into(),
            message: "no feature columns".into(),
        });
    }

    let mut xs = Vec::new();
    let mut raw_labels = Vec::new();
    let mut regions = region_col.map(|_| Vec::new());
    let mut zs = z_col.map(|_| Vec::new());
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        let cell = |c: usize| rec.get(c).unwrap_or("").trim();
        let cell_err = |c: usize, message: String| Error::CsvCell {
            row,
            column: headers[c].clone(),
            message,
        };
        let mut values = Vec::with_capacity(feature_cols.len());
        for &c in &feature_cols {
            let v: f64 = cell(c)
                .parse()
                .map_err(|_| cell_err(c, format!("non-numeric feature {:?}", cell(c))))?;
            if !v.is_finite() {
                return Err(cell_err(c, format!("non-finite feature {v}")));
            }
            values.push(v);
        }
        xs.push(FeatureVector::new(values)?);
        let l: f64 = cell(label_col)
            .parse()
            .map_err(|_| cell_err(label_col, format!("non-numeric label {:?}", cell(label_col))))?;
        raw_labels.push(l);
        if let (Some(c), Some(out)) = (region_col, regions.as_mut()) {
            out.push(Region::from_tag(cell(c)).map_err(|e| cell_err(c, e.to_string()))?);
        }
        if let (Some(c), Some(out)) = (z_col, zs.as_mut()) {
            let z = cell(c)
                .parse::<i64>()
                .map_err(|e| cell_err(c, e.to_string()))
                .and_then(|v| Label::from_sign(v).map_err(|e| cell_err(c, e.to_string())))?;
            out.push(z);
        }
    }

    let unit = raw_labels.iter().all(|&l| l == 0.0 || l == 1.0);
    let signed = raw_labels.iter().all(|&l| l == -1.0 || l == 1.0);
    let labels: Vec<Label> = if unit {
        raw_labels.iter().map(|&l| label_from_unit(l)).collect::<Result<_>>()?
    } else if signed {
        raw_labels.iter().map(|&l| Label::from_bool(l > 0.0)).collect()
    } else {
        return Err(Error::CsvCell {
            row: 0,
            column: "label".into(),
            message: "labels must all be in {0,1} or all in {-1,1}".into(),
        });
    };

    Ok(CsvDataset {
        feature_names: feature_cols.iter().map(|&c| headers[c].clone()).collect(),
        samples: xs
            .into_iter()
            .zip(labels)
            .map(|(x, y)| LabeledSample::new(x, y))
            .collect(),
        regions,
        z: zs,
    })
}

/// Writes `feat_0..feat_{d-1},label,region,z`.
pub fn write_oracle_csv<W: Write>(writer: W, data: &[OracleSample]) -> Result<()> {
    let d = data.first().map_or(0, |o| o.x().dim());
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = (0..d).map(|j| format!("feat_{j}")).collect();
    header.extend(["label", "region", "z"].map(String::from));
    w.write_record(&header)?;
    for o in data {
        if o.x().dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: o.x().dim(),
            });
        }
        let mut rec: Vec<String> = o.x().as_slice().iter().map(|v| v.to_string()).collect();
        rec.push(o.y().to_string());
        rec.push(o.region.tag().to_string());
        rec.push(o.z.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(s: &str) -> Result<CsvDataset> {
        read_feature_csv(s.as_bytes())
    }

    #[test]
    fn signed_labels() {
        let ds = read("feat_0,label\n0.1,1\n0.2,-1\n0.3,1\n").unwrap();
        let ys: Vec<_> = ds.samples.iter().map(|s| s.y).collect();
        assert_eq!(ys, vec![Label::Pos, Label::Neg, Label::Pos]);
        assert!(ds.regions.is_none());
    }

    #[test]
    fn unit_labels() {
        let ds = read("feat_0,label\n0.1,0\n0.2,1\n0.3,0\n").unwrap();
        let ys: Vec<_> = ds.samples.iter().map(|s| s.y).collect();
        assert_eq!(ys, vec![Label::Neg, Label::Pos, Label::Neg]);
    }

    #[test]
    fn region_column() {
        let ds = read("feat_0,feat_1,label,region\n0,1,1,I\n1,0,-1,U\n2,2,1,I\n").unwrap();
        let oracle = ds.to_oracle().unwrap();
        let tags: Vec<_> = oracle.iter().map(|o| o.region).collect();
        assert_eq!(
            tags,
            vec![Region::Informative, Region::Uninformative, Region::Informative]
        );
        assert_eq!(oracle[1].x().as_slice(), &[1.0, 0.0]);
    }

    #[test]
    fn bad_cell_reports_row_and_column() {
        match read("feat_0,label\n0.1,1\nabc,-1\n") {
            Err(Error::CsvCell { row, column, .. }) => {
                assert_eq!(row, 2);
                assert_eq!(column, "feat_0");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn mixed_alphabets_rejected() {
        assert!(read("feat_0,label\n0.1,0\n0.2,-1\n0.3,1\n").is_err());
    }

    #[test]
    fn write_then_read_preserves_rows() {
        let data = vec![
            OracleSample {
                sample: LabeledSample::new(FeatureVector::new(vec![0.25, -1.5]).unwrap(), Label::Pos),
                z: Label::Neg,
                region: Region::Uninformative,
            },
            OracleSample {
                sample: LabeledSample::new(FeatureVector::new(vec![1e-9, 3.0]).unwrap(), Label::Neg),
                z: Label::Pos,
                region: Region::Informative,
            },
        ];
        let mut buf = Vec::new();
        write_oracle_csv(&mut buf, &data).unwrap();
        let back = read_feature_csv(buf.as_slice()).unwrap().to_oracle().unwrap();
        assert_eq!(back, data);
    }
}
