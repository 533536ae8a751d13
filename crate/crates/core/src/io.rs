//! CSV record files.
//!
//! Two-stream files carry the header
//! `subject_id,stream1_positive,stream2_sampled,stream2_positive` with 0/1
//! values; `stream2_positive` is empty for subjects the anchor did not sample.
//! Multi-stream files replace `stream1_positive` with `stream_1..stream_K`.

use std::io::{Read, Write};

use csv::StringRecord;

use crate::domain::{AnchorResult, MultiStreamRecord, SubjectRecord};
use crate::error::{CrcError, Result};

fn parse_flag(value: &str, column: &str, line: u64) -> Result<bool> {
    match value.trim() {
        "1" => Ok(true),
        "0" => Ok(false),
        other => Err(CrcError::Csv(format!(
            "line {line}: column `{column}` must be 0 or 1, got `{other}`"
        ))),
    }
}

fn column(headers: &StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| CrcError::Csv(format!("missing column `{name}`")))
}

struct AnchorColumns {
    sampled: usize,
    positive: usize,
}

impl AnchorColumns {
    fn locate(headers: &StringRecord) -> Result<Self> {
        Ok(Self {
            sampled: column(headers, "stream2_sampled")?,
            positive: column(headers, "stream2_positive")?,
        })
    }

    fn parse(&self, row: &StringRecord, id: &str, line: u64) -> Result<AnchorResult> {
        let sampled = parse_flag(row.get(self.sampled).unwrap_or(""), "stream2_sampled", line)?;
        let raw = row.get(self.positive).unwrap_or("").trim();
        let positive = if raw.is_empty() {
            None
        } else {
            Some(parse_flag(raw, "stream2_positive", line)?)
        };
        AnchorResult::from_parts(sampled, positive).ok_or_else(|| CrcError::InvalidRecord {
            id: id.to_string(),
            reason: format!(
                "line {line}: stream2_positive must be set exactly when stream2_sampled=1"
            ),
        })
    }
}

fn line_of(row: &StringRecord) -> u64 {
    row.position().map(|p| p.line()).unwrap_or(0)
}

pub fn read_records<R: Read>(reader: R) -> Result<Vec<SubjectRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let id_col = column(&headers, "subject_id")?;
    let s1_col = column(&headers, "stream1_positive")?;
    let anchor = AnchorColumns::locate(&headers)?;

    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = line_of(&row);
        let id = row.get(id_col).unwrap_or("").trim().to_string();
        if id.is_empty() {
            return Err(CrcError::Csv(format!("line {line}: empty subject_id")));
        }
        let s1 = parse_flag(row.get(s1_col).unwrap_or(""), "stream1_positive", line)?;
        let a = anchor.parse(&row, &id, line)?;
        out.push(SubjectRecord::new(id, s1, a));
    }
    Ok(out)
}

pub fn read_multistream_records<R: Read>(reader: R) -> Result<Vec<MultiStreamRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let id_col = column(&headers, "subject_id")?;
    let anchor = AnchorColumns::locate(&headers)?;

    let mut stream_cols = Vec::new();
    for k in 1.. {
        match headers
            .iter()
            .position(|h| h.trim() == format!("stream_{k}"))
        {
            Some(i) => stream_cols.push(i),
            None => break,
        }
    }
    if stream_cols.is_empty() {
        return Err(CrcError::Csv("no stream_1..stream_K columns".into()));
    }

    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = line_of(&row);
        let id = row.get(id_col).unwrap_or("").trim().to_string();
        if id.is_empty() {
            return Err(CrcError::Csv(format!("line {line}: empty subject_id")));
        }
        let signals = stream_cols
            .iter()
            .enumerate()
            .map(|(k, &c)| parse_flag(row.get(c).unwrap_or(""), &format!("stream_{}", k + 1), line))
            .collect::<Result<Vec<_>>>()?;
        let a = anchor.parse(&row, &id, line)?;
        out.push(MultiStreamRecord {
            subject_id: id,
            stream_signals: signals,
            anchor: a,
        });
    }
    Ok(out)
}

/// True when the header names `stream_1`, i.e. the multi-stream layout.
pub fn is_multistream_header(first_line: &str) -> bool {
    first_line.split(',').any(|h| h.trim() == "stream_1")
}

pub fn write_records<W: Write>(writer: W, records: &[SubjectRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "subject_id",
        "stream1_positive",
        "stream2_sampled",
        "stream2_positive",
    ])?;
    for r in records {
        let flag = |b: bool| if b { "1" } else { "0" };
        let pos = r.stream2_positive().map(flag).unwrap_or("");
        w.write_record([
            r.subject_id.as_str(),
            flag(r.stream1_positive),
            flag(r.stream2_sampled()),
            pos,
        ])?;
    }
    w.flush().map_err(|e| CrcError::Csv(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_two_stream_file() {
        let data = "subject_id,stream1_positive,stream2_sampled,stream2_positive\n\
                    a,1,1,1\n\
                    b,0,1,0\n\
                    c,1,0,\n";
        let recs = read_records(data.as_bytes()).unwrap();
        assert_eq!(recs.len(), 3);
        assert_eq!(recs[0].anchor, AnchorResult::Positive);
        assert_eq!(recs[1].anchor, AnchorResult::Negative);
        assert_eq!(recs[2].anchor, AnchorResult::NotSampled);
        assert!(recs[2].stream1_positive);
    }

    #[test]
    fn rejects_inconsistent_anchor_fields() {
        let data = "subject_id,stream1_positive,stream2_sampled,stream2_positive\nx,1,0,1\n";
        assert!(matches!(
            read_records(data.as_bytes()),
            Err(CrcError::InvalidRecord { .. })
        ));
        let data = "subject_id,stream1_positive,stream2_sampled,stream2_positive\nx,yes,0,\n";
        assert!(matches!(
            read_records(data.as_bytes()),
            Err(CrcError::Csv(_))
        ));
    }

    #[test]
    fn reads_multistream_file() {
        let data = "subject_id,stream_1,stream_2,stream_3,stream2_sampled,stream2_positive\n\
                    a,0,1,0,1,1\n\
                    b,0,0,0,0,\n";
        assert!(is_multistream_header(data.lines().next().unwrap()));
        let recs = read_multistream_records(data.as_bytes()).unwrap();
        assert_eq!(recs[0].stream_signals, vec![false, true, false]);
        assert_eq!(recs[1].anchor, AnchorResult::NotSampled);
    }

    #[test]
    fn write_then_read() {
        let recs = vec![
            SubjectRecord::new("a", true, AnchorResult::Positive),
            SubjectRecord::new("b", false, AnchorResult::Negative),
            SubjectRecord::new("c", true, AnchorResult::NotSampled),
        ];
        let mut buf = Vec::new();
        write_records(&mut buf, &recs).unwrap();
        assert_eq!(read_records(buf.as_slice()).unwrap(), recs);
    }
}
