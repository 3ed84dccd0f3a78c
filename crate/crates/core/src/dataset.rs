//! JSONL measurement datasets: one header object, then one record per line.
//!
//! ```text
//! {"schema":"shadowbench/1","n_qubits":2,"ensemble":"pauli","n_u":500,"n_m":150,"seed":7,"metadata":{}}
//! {"r":1,"m":1,"basis":["X","Z"],"bits":"01"}
//! {"r":1,"m":2,"u":[[[1,0],[0,0],[0,0],[1,0]],…],"bits":"11"}
//! ```
//!
//! `r` and `m` are 1-based. Explicit unitaries are row-major 2×2 with `[re, im]`
//! entries. Bit `i` of `bits` belongs to qubit `i`.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use nalgebra::Matrix2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::shadows::{Basis, Ensemble, MeasurementRecord, PauliBasis};

pub const SCHEMA: &str = "shadowbench/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub schema: String,
    pub n_qubits: usize,
    pub ensemble: Ensemble,
    pub n_u: usize,
    pub n_m: usize,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Free-form provenance such as the simulated state and evolution time.
    #[serde(default)]
    pub metadata: BTreeMap<String, serde_json::Value>,
}

impl DatasetHeader {
    pub fn new(n_qubits: usize, ensemble: Ensemble, n_u: usize, n_m: usize) -> Self {
        Self { schema: SCHEMA.to_string(), n_qubits, ensemble, n_u, n_m, seed: None, metadata: BTreeMap::new() }
    }

    /// Checks a record against the header.
    pub fn check(&self, rec: &MeasurementRecord) -> Result<()> {
        rec.validate()?;
        if rec.bits.len() != self.n_qubits {
            return Err(Error::MalformedRecord(format!("{} bits, header declares {} qubits", rec.bits.len(), self.n_qubits)));
        }
        if rec.basis.ensemble() != self.ensemble {
            return Err(Error::MalformedRecord(format!("{:?} record in a {:?} dataset", rec.basis.ensemble(), self.ensemble)));
        }
        if !(1..=self.n_u).contains(&rec.r) || !(1..=self.n_m).contains(&rec.m) {
            return Err(Error::MalformedRecord(format!(
                "r={} m={} outside 1..={} and 1..={}",
                rec.r, rec.m, self.n_u, self.n_m
            )));
        }
        Ok(())
    }
}

type UnitaryJson = [[f64; 2]; 4];

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordJson {
    r: usize,
    m: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    basis: Option<Vec<PauliBasis>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    u: Option<Vec<UnitaryJson>>,
    bits: String,
}

impl From<&MeasurementRecord> for RecordJson {
    fn from(rec: &MeasurementRecord) -> Self {
        let (basis, u) = match &rec.basis {
            Basis::Pauli(b) => (Some(b.clone()), None),
            Basis::Unitary(us) => {
                let entries = us
                    .iter()
                    .map(|m| [m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]].map(|z| [z.re, z.im]))
                    .collect();
                (None, Some(entries))
            }
        };
        let bits = rec.bits.iter().map(|&b| if b == 0 { '0' } else { '1' }).collect();
        Self { r: rec.r, m: rec.m, basis, u, bits }
    }
}

impl TryFrom<RecordJson> for MeasurementRecord {
    type Error = Error;

    fn try_from(j: RecordJson) -> Result<Self> {
        let basis = match (j.basis, j.u) {
            (Some(b), None) => Basis::Pauli(b),
            (None, Some(us)) => Basis::Unitary(
                us.iter()
                    .map(|e| {
                        let z = |k: usize| Complex64::new(e[k][0], e[k][1]);
                        Matrix2::new(z(0), z(1), z(2), z(3))
                    })
                    .collect(),
            ),
            _ => return Err(Error::MalformedRecord("record needs exactly one of \"basis\" and \"u\"".into())),
        };
        let bits = j
            .bits
            .chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                other => Err(Error::MalformedRecord(format!("invalid bit {other:?}"))),
            })
            .collect::<Result<Vec<u8>>>()?;
        Ok(MeasurementRecord { r: j.r, m: j.m, basis, bits })
    }
}

pub fn record_to_json(rec: &MeasurementRecord) -> Result<String> {
    Ok(serde_json::to_string(&RecordJson::from(rec))?)
}

pub fn record_from_json(line: &str) -> Result<MeasurementRecord> {
    let j: RecordJson = serde_json::from_str(line)?;
    j.try_into()
}

pub struct DatasetWriter<W: Write> {
    out: W,
    header: DatasetHeader,
}

impl<W: Write> DatasetWriter<W> {
    pub fn new(mut out: W, header: DatasetHeader) -> Result<Self> {
        serde_json::to_writer(&mut out, &header)?;
        out.write_all(b"\n")?;
        Ok(Self { out, header })
    }

    pub fn write(&mut self, rec: &MeasurementRecord) -> Result<()> {
        self.header.check(rec)?;
        self.out.write_all(record_to_json(rec)?.as_bytes())?;
        self.out.write_all(b"\n")?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

/// Streaming reader; records are parsed one line at a time.
pub struct DatasetReader<R: BufRead> {
    lines: std::io::Lines<R>,
    header: DatasetHeader,
    line_no: usize,
}

impl<R: BufRead> DatasetReader<R> {
    pub fn new(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let first = lines.next().ok_or_else(|| Error::MalformedRecord("empty dataset".into()))??;
        let header: DatasetHeader =
            serde_json::from_str(&first).map_err(|e| Error::MalformedRecord(format!("line 1: invalid header: {e}")))?;
        if header.schema != SCHEMA {
            return Err(Error::MalformedRecord(format!("line 1: unsupported schema {:?}", header.schema)));
        }
        Ok(Self { lines, header, line_no: 1 })
    }

    pub fn header(&self) -> &DatasetHeader {
        &self.header
    }
}

impl<R: BufRead> Iterator for DatasetReader<R> {
    type Item = Result<MeasurementRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = match self.lines.next()? {
                Ok(l) => l,
                Err(e) => return Some(Err(e.into())),
            };
            self.line_no += 1;
            if line.trim().is_empty() {
                continue;
            }
            let line_no = self.line_no;
            let parsed = record_from_json(&line).and_then(|rec| self.header.check(&rec).map(|_| rec));
            return Some(parsed.map_err(|e| match e {
                Error::MalformedRecord(msg) => Error::MalformedRecord(format!("line {line_no}: {msg}")),
                other => Error::MalformedRecord(format!("line {line_no}: {other}")),
            }));
        }
    }
}

/// Reads a whole dataset into memory.
pub fn read_dataset(input: impl BufRead) -> Result<(DatasetHeader, Vec<MeasurementRecord>)> {
    let reader = DatasetReader::new(input)?;
    let header = reader.header().clone();
    let records = reader.collect::<Result<Vec<_>>>()?;
    Ok((header, records))
}

pub fn write_dataset(out: impl Write, header: &DatasetHeader, records: &[MeasurementRecord]) -> Result<()> {
    let mut w = DatasetWriter::new(out, header.clone())?;
    for rec in records {
        w.write(rec)?;
    }
    w.finish()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pauli_record_layout() {
        let rec = MeasurementRecord { r: 3, m: 1, basis: Basis::Pauli(vec![PauliBasis::X, PauliBasis::Z]), bits: vec![0, 1] };
        assert_eq!(record_to_json(&rec).unwrap(), r#"{"r":3,"m":1,"basis":["X","Z"],"bits":"01"}"#);
        assert_eq!(record_from_json(r#"{"r":3,"m":1,"basis":["X","Z"],"bits":"01"}"#).unwrap(), rec);
    }

    #[test]
    fn rejects_bad_lines() {
        assert!(record_from_json(r#"{"r":1,"m":1,"bits":"01"}"#).is_err());
        assert!(record_from_json(r#"{"r":1,"m":1,"basis":["X"],"bits":"2"}"#).is_err());
        assert!(record_from_json(r#"{"r":1,"m":1,"basis":["Q"],"bits":"0"}"#).is_err());
        let text = format!(
            "{}\n{}\n",
            serde_json::to_string(&DatasetHeader::new(1, Ensemble::Pauli, 2, 1)).unwrap(),
            r#"{"r":5,"m":1,"basis":["X"],"bits":"0"}"#
        );
        let err = read_dataset(text.as_bytes()).unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
        assert!(read_dataset("{\"schema\":\"other/1\"}".as_bytes()).is_err());
    }
}
