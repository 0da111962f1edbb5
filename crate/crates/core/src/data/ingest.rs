//! Schema-driven CSV ingestion (RFC 4180, header row required) and ordered
//! replay of schema-compatible files with segment markers.

use std::collections::HashMap;
use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};

use crate::data::schema::{EncodedSchema, Schema, SlotKind};
use crate::data::standardize::Standardizer;
use crate::data::StreamEvent;
use crate::error::{FeamoeError, Result};
use crate::loss::StreamInstance;

/// Streaming CSV reader producing encoded instances in file order.
///
/// Rows are standardized with statistics as of the previous row; rows with
/// missing values are skipped and counted.
pub struct CsvStream<R: Read> {
    records: csv::StringRecordsIntoIter<R>,
    encoded: EncodedSchema,
    column_index: Vec<usize>,
    label_index: usize,
    group_index: usize,
    standardizer: Standardizer,
    row: u64,
    skipped: u64,
}

impl CsvStream<File> {
    pub fn open(path: &Path, schema: &Schema) -> Result<Self> {
        let encoded = schema.encode()?;
        let standardizer = Standardizer::new(encoded.numeric_slots);
        Self::resume(File::open(path)?, encoded, standardizer)
    }
}

impl<R: Read> CsvStream<R> {
    pub fn from_reader(reader: R, schema: &Schema) -> Result<Self> {
        let encoded = schema.encode()?;
        let standardizer = Standardizer::new(encoded.numeric_slots);
        Self::resume(reader, encoded, standardizer)
    }

    /// Continue a stream over a new reader with carried-over statistics.
    pub fn resume(reader: R, encoded: EncodedSchema, standardizer: Standardizer) -> Result<Self> {
        let mut csv_reader = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = csv_reader.headers()?.clone();
        let positions: HashMap<&str, usize> =
            headers.iter().enumerate().map(|(i, name)| (name, i)).collect();
        let lookup = |name: &str| -> Result<usize> {
            positions
                .get(name)
                .copied()
                .ok_or_else(|| FeamoeError::Schema(format!("missing column '{name}' in header")))
        };
        let column_index = encoded
            .schema
            .feature_columns
            .iter()
            .map(|c| lookup(c))
            .collect::<Result<Vec<_>>>()?;
        let label_index = lookup(&encoded.schema.label_column)?;
        let group_index = lookup(&encoded.schema.group_column)?;
        Ok(Self {
            records: csv_reader.into_records(),
            encoded,
            column_index,
            label_index,
            group_index,
            standardizer,
            row: 0,
            skipped: 0,
        })
    }

    pub fn encoded(&self) -> &EncodedSchema {
        &self.encoded
    }

    /// Data rows skipped because of missing values.
    pub fn skipped_rows(&self) -> u64 {
        self.skipped
    }

    pub fn into_standardizer(self) -> Standardizer {
        self.standardizer
    }

    fn parse_record(&mut self, record: &csv::StringRecord) -> Result<Option<StreamInstance>> {
        let field = |idx: usize| -> Result<&str> {
            record.get(idx).map(str::trim).ok_or_else(|| FeamoeError::CsvRow {
                row: self.row,
                message: "record has fewer fields than the header".into(),
            })
        };

        // Missing value in any used column skips the whole row.
        let mut used = self.column_index.clone();
        used.push(self.label_index);
        used.push(self.group_index);
        for idx in &used {
            if field(*idx)?.is_empty() {
                self.skipped += 1;
                return Ok(None);
            }
        }

        let mut features = Vec::with_capacity(self.encoded.feature_dim());
        let mut numeric_raw = Vec::with_capacity(self.encoded.numeric_slots);
        let mut numeric_positions = Vec::with_capacity(self.encoded.numeric_slots);
        let group_raw = field(self.group_index)?.to_string();
        let group = u8::from(group_raw == self.encoded.schema.privileged_group_value);

        for (slot, &col_idx) in self.encoded.slots.iter().zip(&self.column_index) {
            let raw = field(col_idx)?;
            match slot {
                SlotKind::Numeric { .. } => {
                    let value: f64 = raw.parse().map_err(|_| FeamoeError::CsvRow {
                        row: self.row,
                        message: format!("unparseable numeric value '{raw}'"),
                    })?;
                    numeric_positions.push(features.len());
                    numeric_raw.push(value);
                    features.push(0.0);
                }
                SlotKind::OneHot { column, categories } => {
                    let hit = categories.iter().position(|c| c == raw);
                    match hit {
                        Some(pos) => {
                            for i in 0..categories.len() {
                                features.push(if i == pos { 1.0 } else { 0.0 });
                            }
                        }
                        None => {
                            return Err(FeamoeError::CsvRow {
                                row: self.row,
                                message: format!("unknown category '{raw}' in column '{column}'"),
                            });
                        }
                    }
                }
                SlotKind::GroupBit => {
                    features.push(f64::from(group));
                }
            }
        }

        self.standardizer.standardize_then_update(&mut numeric_raw);
        for (pos, value) in numeric_positions.into_iter().zip(numeric_raw) {
            features[pos] = value;
        }

        let label_raw = field(self.label_index)?;
        let label = u8::from(label_raw == self.encoded.schema.positive_label_value);
        Ok(Some(StreamInstance::new(features, label, group)?))
    }
}

impl<R: Read> Iterator for CsvStream<R> {
    type Item = Result<StreamInstance>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let record = match self.records.next()? {
                Ok(r) => r,
                Err(e) => return Some(Err(e.into())),
            };
            self.row += 1;
            match self.parse_record(&record) {
                Ok(Some(instance)) => return Some(Ok(instance)),
                Ok(None) => continue,
                Err(e) => return Some(Err(e)),
            }
        }
    }
}

/// Open a CSV stream over a file.
pub fn ingest_csv(path: &Path, schema: &Schema) -> Result<CsvStream<File>> {
    CsvStream::open(path, schema)
}

/// Drain a stream, returning the instances and the skipped-row count.
pub fn read_all<R: Read>(mut stream: CsvStream<R>) -> Result<(Vec<StreamInstance>, u64)> {
    let mut out = Vec::new();
    for item in &mut stream {
        out.push(item?);
    }
    Ok((out, stream.skipped_rows()))
}

/// Concatenated replay of files sharing one schema, with a segment boundary
/// after each file and standardizer statistics carried across files.
pub struct SegmentReplay {
    encoded: EncodedSchema,
    remaining: std::vec::IntoIter<PathBuf>,
    current: Option<CsvStream<File>>,
    current_path: PathBuf,
    standardizer: Option<Standardizer>,
    segment_index: usize,
}

impl SegmentReplay {
    pub fn new(paths: Vec<PathBuf>, schema: &Schema) -> Result<Self> {
        let encoded = schema.encode()?;
        let standardizer = Standardizer::new(encoded.numeric_slots);
        Ok(Self {
            encoded,
            remaining: paths.into_iter(),
            current: None,
            current_path: PathBuf::new(),
            standardizer: Some(standardizer),
            segment_index: 0,
        })
    }

    fn file_error(&self, e: FeamoeError) -> FeamoeError {
        FeamoeError::Schema(format!("{}: {e}", self.current_path.display()))
    }
}

impl Iterator for SegmentReplay {
    type Item = Result<StreamEvent>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            if self.current.is_none() {
                let path = self.remaining.next()?;
                self.current_path = path.clone();
                let file = match File::open(&path) {
                    Ok(f) => f,
                    Err(e) => return Some(Err(self.file_error(e.into()))),
                };
                let standardizer = self.standardizer.take().expect("standardizer available");
                match CsvStream::resume(file, self.encoded.clone(), standardizer) {
                    Ok(stream) => self.current = Some(stream),
                    Err(e) => return Some(Err(self.file_error(e))),
                }
            }
            let stream = self.current.as_mut().expect("stream open");
            match stream.next() {
                Some(Ok(instance)) => return Some(Ok(StreamEvent::Instance(instance))),
                Some(Err(e)) => return Some(Err(self.file_error(e))),
                None => {
                    let finished = self.current.take().expect("stream open");
                    self.standardizer = Some(finished.into_standardizer());
                    let index = self.segment_index;
                    self.segment_index += 1;
                    return Some(Ok(StreamEvent::SegmentBoundary { index }));
                }
            }
        }
    }
}

/// Replay `paths` in order with boundary markers after each file.
pub fn segment_replay(paths: Vec<PathBuf>, schema: &Schema) -> Result<SegmentReplay> {
    SegmentReplay::new(paths, schema)
}
