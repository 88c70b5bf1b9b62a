//! Dataset ingestion, tokenization, TF-IDF featurization and pool bookkeeping.

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper bound on vocabulary size; the most frequent tokens are kept.
pub const MAX_VOCABULARY: usize = 100_000;

/// Lowercased tokens split on maximal runs of non-alphanumeric characters.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelMode {
    SingleLabel,
    MultiLabel,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSpace {
    pub mode: LabelMode,
    pub class_names: Vec<String>,
}

impl LabelSpace {
    pub fn new(mode: LabelMode, class_names: Vec<String>) -> Result<Self> {
        if class_names.len() < 2 {
            return Err(Error::LabelSpace(format!(
                "need at least 2 classes, got {}",
                class_names.len()
            )));
        }
        let distinct: BTreeSet<&String> = class_names.iter().collect();
        if distinct.len() != class_names.len() {
            return Err(Error::LabelSpace("class names must be unique".into()));
        }
        if class_names.iter().any(|c| c.is_empty() || c.contains('|')) {
            return Err(Error::LabelSpace(
                "class names must be non-empty and must not contain `|`".into(),
            ));
        }
        Ok(Self { mode, class_names })
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn is_multi_label(&self) -> bool {
        self.mode == LabelMode::MultiLabel
    }

    pub fn class_index(&self, name: &str) -> Option<usize> {
        self.class_names.iter().position(|c| c == name)
    }

    /// Parses a label cell (`a` or `a|b|c`). `None` for an empty cell.
    pub fn parse_cell(&self, cell: &str) -> Result<Option<LabelSet>> {
        let cell = cell.trim();
        if cell.is_empty() {
            return Ok(None);
        }
        let names: Vec<&str> = match self.mode {
            LabelMode::SingleLabel => vec![cell],
            LabelMode::MultiLabel => cell
                .split('|')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .collect(),
        };
        self.label_set_from_names(&names).map(Some)
    }

    pub fn label_set_from_names<S: AsRef<str>>(&self, names: &[S]) -> Result<LabelSet> {
        let classes = names
            .iter()
            .map(|n| {
                self.class_index(n.as_ref())
                    .ok_or_else(|| Error::UnknownClass(n.as_ref().to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        let set = LabelSet::new(classes);
        self.validate(&set)?;
        Ok(set)
    }

    pub fn validate(&self, set: &LabelSet) -> Result<()> {
        if let Some(&c) = set.classes().iter().find(|&&c| c >= self.num_classes()) {
            return Err(Error::InvalidLabel(format!("class index {c} out of range")));
        }
        if self.mode == LabelMode::SingleLabel && set.len() != 1 {
            return Err(Error::InvalidLabel(format!(
                "single-label mode requires exactly one class, got {}",
                set.len()
            )));
        }
        Ok(())
    }

    pub fn format_cell(&self, set: &LabelSet) -> String {
        set.classes()
            .iter()
            .map(|&c| self.class_names[c].as_str())
            .collect::<Vec<_>>()
            .join("|")
    }
}

/// Sorted, duplicate-free set of class indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "Vec<usize>", into = "Vec<usize>")]
pub struct LabelSet(Vec<usize>);

impl LabelSet {
    pub fn new(mut classes: Vec<usize>) -> Self {
        classes.sort_unstable();
        classes.dedup();
        Self(classes)
    }

    pub fn single(class: usize) -> Self {
        Self(vec![class])
    }

    pub fn classes(&self) -> &[usize] {
        &self.0
    }

    pub fn contains(&self, class: usize) -> bool {
        self.0.binary_search(&class).is_ok()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// First class; the label in single-label mode.
    pub fn primary(&self) -> Option<usize> {
        self.0.first().copied()
    }
}

impl From<Vec<usize>> for LabelSet {
    fn from(v: Vec<usize>) -> Self {
        LabelSet::new(v)
    }
}

impl From<LabelSet> for Vec<usize> {
    fn from(s: LabelSet) -> Self {
        s.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: usize,
    pub text: String,
}

/// Documents, their label space, and the label assignment known at load time.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    docs: Vec<Document>,
    label_space: LabelSpace,
    labels: Vec<Option<LabelSet>>,
}

impl Dataset {
    pub fn new(
        texts: Vec<String>,
        label_space: LabelSpace,
        labels: Vec<Option<LabelSet>>,
    ) -> Result<Self> {
        if texts.len() != labels.len() {
            return Err(Error::LengthMismatch(texts.len(), labels.len()));
        }
        for set in labels.iter().flatten() {
            label_space.validate(set)?;
        }
        let docs = texts
            .into_iter()
            .enumerate()
            .map(|(id, text)| Document { id, text })
            .collect();
        Ok(Self {
            docs,
            label_space,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn docs(&self) -> &[Document] {
        &self.docs
    }

    pub fn text(&self, id: usize) -> &str {
        &self.docs[id].text
    }

    pub fn label_space(&self) -> &LabelSpace {
        &self.label_space
    }

    pub fn labels(&self) -> &[Option<LabelSet>] {
        &self.labels
    }

    pub fn label(&self, id: usize) -> Option<&LabelSet> {
        self.labels.get(id).and_then(Option::as_ref)
    }

    pub fn is_fully_labeled(&self) -> bool {
        self.labels.iter().all(Option::is_some)
    }

    /// Labeled rows go to the labeled pool, the rest to the unlabeled pool.
    pub fn initial_pools(&self) -> PoolState {
        let labeled = (0..self.len()).filter(|&i| self.labels[i].is_some()).collect();
        let unlabeled = (0..self.len()).filter(|&i| self.labels[i].is_none()).collect();
        PoolState {
            labeled,
            unlabeled,
        }
    }

    /// Content hash over label space and texts.
    pub fn fingerprint(&self) -> String {
        let mut buf = serde_json::to_vec(&self.label_space).expect("label space serializes");
        for d in &self.docs {
            buf.extend_from_slice(&(d.text.len() as u64).to_le_bytes());
            buf.extend_from_slice(d.text.as_bytes());
        }
        crate::sha256_hex(&buf)
    }

    /// Writes `text,label` CSV (multi-label cells joined with `|`).
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["text", "label"])?;
        for (doc, label) in self.docs.iter().zip(&self.labels) {
            let cell = label
                .as_ref()
                .map(|l| self.label_space.format_cell(l))
                .unwrap_or_default();
            w.write_record([doc.text.as_str(), cell.as_str()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes one `{"id","text","labels"}` object per line; unlabeled rows carry `null`.
    pub fn write_jsonl<W: Write>(&self, mut writer: W) -> Result<()> {
        for (doc, label) in self.docs.iter().zip(&self.labels) {
            let record = JsonlRecord {
                id: Some(doc.id),
                text: doc.text.clone(),
                labels: label.as_ref().map(|l| {
                    l.classes()
                        .iter()
                        .map(|&c| self.label_space.class_names[c].clone())
                        .collect()
                }),
            };
            serde_json::to_writer(&mut writer, &record)?;
            writer.write_all(b"\n")?;
        }
        writer.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JsonlRecord {
    #[serde(default)]
    pub id: Option<usize>,
    pub text: String,
    #[serde(default)]
    pub labels: Option<Vec<String>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataFormat {
    Csv,
    Jsonl,
}

impl DataFormat {
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("json") => DataFormat::Jsonl,
            _ => DataFormat::Csv,
        }
    }
}

pub fn load_dataset(
    path: &Path,
    format: DataFormat,
    label_space: Option<LabelSpace>,
) -> Result<Dataset> {
    let file = File::open(path)?;
    match format {
        DataFormat::Csv => read_csv(file, label_space),
        DataFormat::Jsonl => read_jsonl(BufReader::new(file), label_space),
    }
}

/// Infers a label space from raw label names: multi-label if any row names
/// more than one class, classes in lexicographic order.
fn infer_label_space(rows: &[Vec<String>], multi_hint: bool) -> Result<LabelSpace> {
    let names: BTreeSet<&String> = rows.iter().flatten().collect();
    let multi = multi_hint || rows.iter().any(|r| r.len() > 1);
    let mode = if multi {
        LabelMode::MultiLabel
    } else {
        LabelMode::SingleLabel
    };
    LabelSpace::new(mode, names.into_iter().cloned().collect())
}

pub fn read_csv<R: Read>(reader: R, label_space: Option<LabelSpace>) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let (text_col, label_col) = match (col("text"), col("label")) {
        (Some(t), Some(l)) => (t, l),
        _ => {
            return Err(Error::Malformed {
                line: 1,
                message: "header must contain `text` and `label` columns".into(),
            })
        }
    };
    let mut texts = Vec::new();
    let mut cells = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            Error::Malformed {
                line,
                message: e.to_string(),
            }
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let (Some(text), Some(label)) = (record.get(text_col), record.get(label_col)) else {
            return Err(Error::Malformed {
                line,
                message: format!("expected {} fields, got {}", headers.len(), record.len()),
            });
        };
        texts.push(text.to_string());
        cells.push((line, label.to_string()));
    }
    let space = match label_space {
        Some(space) => space,
        None => {
            let raw: Vec<Vec<String>> = cells
                .iter()
                .map(|(_, c)| {
                    c.split('|')
                        .map(|s| s.trim().to_string())
                        .filter(|s| !s.is_empty())
                        .collect()
                })
                .collect();
            infer_label_space(&raw, false)?
        }
    };
    let labels = cells
        .iter()
        .map(|(line, cell)| {
            space.parse_cell(cell).map_err(|e| match e {
                Error::UnknownClass(c) => Error::Malformed {
                    line: *line,
                    message: format!("unknown class `{c}`"),
                },
                Error::InvalidLabel(m) => Error::Malformed {
                    line: *line,
                    message: m,
                },
                other => other,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(texts, space, labels)
}

pub fn read_jsonl<R: BufRead>(reader: R, label_space: Option<LabelSpace>) -> Result<Dataset> {
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: JsonlRecord = serde_json::from_str(&line).map_err(|e| Error::Malformed {
            line: i as u64 + 1,
            message: e.to_string(),
        })?;
        records.push((i as u64 + 1, rec));
    }
    let space = match label_space {
        Some(space) => space,
        None => {
            let raw: Vec<Vec<String>> = records
                .iter()
                .map(|(_, r)| r.labels.clone().unwrap_or_default())
                .collect();
            // an explicit empty list only makes sense as a multi-label assignment
            let multi_hint = records
                .iter()
                .any(|(_, r)| matches!(&r.labels, Some(l) if l.is_empty()));
            infer_label_space(&raw, multi_hint)?
        }
    };
    let mut texts = Vec::with_capacity(records.len());
    let mut labels = Vec::with_capacity(records.len());
    for (line, rec) in records {
        let set = match rec.labels {
            None => None,
            Some(names) if names.is_empty() && !space.is_multi_label() => None,
            Some(names) => Some(space.label_set_from_names(&names).map_err(|e| {
                Error::Malformed {
                    line,
                    message: e.to_string(),
                }
            })?),
        };
        texts.push(rec.text);
        labels.push(set);
    }
    Dataset::new(texts, space, labels)
}

pub fn export_dataset(dataset: &Dataset, path: &Path, format: DataFormat) -> Result<()> {
    let writer = BufWriter::new(File::create(path)?);
    match format {
        DataFormat::Csv => dataset.write_csv(writer),
        DataFormat::Jsonl => dataset.write_jsonl(writer),
    }
}

/// Writes collected labels as `id,label` CSV rows (multi-label cells joined
/// with `|`).
pub fn write_assignments_csv<'a, W: Write>(
    writer: W,
    space: &LabelSpace,
    assignments: impl IntoIterator<Item = (usize, &'a LabelSet)>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["id", "label"])?;
    for (id, set) in assignments {
        w.write_record([id.to_string(), space.format_cell(set)])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads `id,label` CSV written by [`write_assignments_csv`].
pub fn read_assignments_csv<R: Read>(reader: R, space: &LabelSpace) -> Result<Vec<(usize, LabelSet)>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.iter().map(str::trim).collect::<Vec<_>>() != ["id", "label"] {
        return Err(Error::Malformed {
            line: 1,
            message: "header must be `id,label`".into(),
        });
    }
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let malformed = |message: String| Error::Malformed { line, message };
        let id = record[0]
            .trim()
            .parse::<usize>()
            .map_err(|e| malformed(format!("bad id: {e}")))?;
        let set = match space.parse_cell(&record[1]).map_err(|e| malformed(e.to_string()))? {
            Some(set) => set,
            None if space.is_multi_label() => LabelSet::new(Vec::new()),
            None => return Err(malformed("empty label".into())),
        };
        out.push((id, set));
    }
    Ok(out)
}

/// Writes collected labels as `{"id","text","labels"}` lines; reloading the
/// file with [`load_dataset`] yields the same texts and label sets in order.
pub fn write_assignments_jsonl<'a, W: Write>(
    mut writer: W,
    dataset: &Dataset,
    assignments: impl IntoIterator<Item = (usize, &'a LabelSet)>,
) -> Result<()> {
    let names = &dataset.label_space().class_names;
    for (id, set) in assignments {
        let record = JsonlRecord {
            id: Some(id),
            text: dataset.text(id).to_string(),
            labels: Some(set.classes().iter().map(|&c| names[c].clone()).collect()),
        };
        serde_json::to_writer(&mut writer, &record)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

/// Token → column mapping plus the smoothed idf weight of each column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "VocabularyRepr", into = "VocabularyRepr")]
pub struct Vocabulary {
    terms: Vec<String>,
    idf: Vec<f64>,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct VocabularyRepr {
    terms: Vec<String>,
    idf: Vec<f64>,
}

impl From<VocabularyRepr> for Vocabulary {
    fn from(r: VocabularyRepr) -> Self {
        Vocabulary::from_parts(r.terms, r.idf)
    }
}

impl From<Vocabulary> for VocabularyRepr {
    fn from(v: Vocabulary) -> Self {
        VocabularyRepr {
            terms: v.terms,
            idf: v.idf,
        }
    }
}

impl Vocabulary {
    fn from_parts(terms: Vec<String>, idf: Vec<f64>) -> Self {
        let index = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Self { terms, idf, index }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn idf(&self) -> &[f64] {
        &self.idf
    }

    pub fn hash(&self) -> String {
        crate::sha256_hex(self.terms.join("\n").as_bytes())
    }
}

/// Builds the vocabulary of tokens with document frequency ≥ `min_df`,
/// indexed in lexicographic order.
pub fn build_vocabulary(docs: &[Document], min_df: usize) -> Result<Vocabulary> {
    if min_df == 0 || min_df > docs.len().max(1) {
        return Err(Error::InvalidParameter(format!(
            "min_df must be in 1..={}, got {min_df}",
            docs.len()
        )));
    }
    let mut df: HashMap<String, usize> = HashMap::new();
    for doc in docs {
        let distinct: BTreeSet<String> = tokenize(&doc.text).into_iter().collect();
        for t in distinct {
            *df.entry(t).or_insert(0) += 1;
        }
    }
    let mut kept: Vec<(String, usize)> = df.into_iter().filter(|(_, c)| *c >= min_df).collect();
    if kept.is_empty() {
        return Err(Error::NoFeatures);
    }
    if kept.len() > MAX_VOCABULARY {
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        kept.truncate(MAX_VOCABULARY);
    }
    kept.sort_by(|a, b| a.0.cmp(&b.0));
    let n = docs.len() as f64;
    let idf = kept
        .iter()
        .map(|(_, c)| ((1.0 + n) / (1.0 + *c as f64)).ln() + 1.0)
        .collect();
    let terms = kept.into_iter().map(|(t, _)| t).collect();
    Ok(Vocabulary::from_parts(terms, idf))
}

/// Compressed sparse rows; column indices strictly increasing within a row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseMatrix {
    n_cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn from_rows(n_cols: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            for (c, v) in row {
                assert!(c < n_cols, "column {c} out of range");
                if indices.len() > *indptr.last().unwrap() && *indices.last().unwrap() == c {
                    *values.last_mut().unwrap() += v;
                } else {
                    indices.push(c);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Self {
            n_cols,
            indptr,
            indices,
            values,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.indptr.len() - 1
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.indptr[i], self.indptr[i + 1]);
        (&self.indices[a..b], &self.values[a..b])
    }

    pub fn row_norm(&self, i: usize) -> f64 {
        self.row(i).1.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn to_dense_row(&self, i: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.n_cols];
        let (cols, vals) = self.row(i);
        for (&c, &v) in cols.iter().zip(vals) {
            out[c] = v;
        }
        out
    }
}

/// TF-IDF rows, L2-normalized; out-of-vocabulary tokens are ignored.
pub fn tfidf_transform(docs: &[Document], vocabulary: &Vocabulary) -> SparseMatrix {
    let rows = docs
        .iter()
        .map(|doc| {
            let mut counts: HashMap<usize, f64> = HashMap::new();
            for t in tokenize(&doc.text) {
                if let Some(c) = vocabulary.get(&t) {
                    *counts.entry(c).or_insert(0.0) += 1.0;
                }
            }
            let mut row: Vec<(usize, f64)> = counts
                .into_iter()
                .map(|(c, tf)| (c, tf * vocabulary.idf[c]))
                .collect();
            row.sort_by_key(|&(c, _)| c);
            let norm = row.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
            if norm > 0.0 {
                for (_, w) in row.iter_mut() {
                    *w /= norm;
                }
            }
            row
        })
        .collect();
    SparseMatrix::from_rows(vocabulary.len(), rows)
}

/// The two feature views classifiers consume: TF-IDF rows and in-vocabulary
/// token-id sequences.
#[derive(Debug, Clone)]
pub struct FeatureSet {
    vocabulary: Vocabulary,
    tfidf: SparseMatrix,
    tokens: Vec<Vec<u32>>,
}

impl FeatureSet {
    pub fn build(docs: &[Document], min_df: usize) -> Result<Self> {
        let vocabulary = build_vocabulary(docs, min_df)?;
        Ok(Self::with_vocabulary(docs, vocabulary))
    }

    pub fn with_vocabulary(docs: &[Document], vocabulary: Vocabulary) -> Self {
        let tfidf = tfidf_transform(docs, &vocabulary);
        let tokens = docs
            .iter()
            .map(|d| {
                tokenize(&d.text)
                    .iter()
                    .filter_map(|t| vocabulary.get(t).map(|c| c as u32))
                    .collect()
            })
            .collect();
        Self {
            vocabulary,
            tfidf,
            tokens,
        }
    }

    /// Feature set made directly from token-id sequences, for tests and
    /// synthetic fixtures. TF-IDF rows are built from the same tokens.
    pub fn from_tokens(vocab_size: usize, tokens: Vec<Vec<u32>>) -> Self {
        let terms: Vec<String> = (0..vocab_size).map(|i| format!("t{i:08}")).collect();
        let docs: Vec<Document> = tokens
            .iter()
            .enumerate()
            .map(|(id, toks)| Document {
                id,
                text: toks
                    .iter()
                    .map(|&t| terms[t as usize].as_str())
                    .collect::<Vec<_>>()
                    .join(" "),
            })
            .collect();
        let n = docs.len() as f64;
        let mut df = vec![0usize; vocab_size];
        for toks in &tokens {
            let distinct: BTreeSet<u32> = toks.iter().copied().collect();
            for t in distinct {
                df[t as usize] += 1;
            }
        }
        let idf = df
            .iter()
            .map(|&c| ((1.0 + n) / (1.0 + c as f64)).ln() + 1.0)
            .collect();
        let vocabulary = Vocabulary::from_parts(terms, idf);
        let tfidf = tfidf_transform(&docs, &vocabulary);
        Self {
            vocabulary,
            tfidf,
            tokens,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn vocab_size(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn tfidf(&self) -> &SparseMatrix {
        &self.tfidf
    }

    pub fn tokens(&self, row: usize) -> &[u32] {
        &self.tokens[row]
    }
}

/// Disjoint labeled / unlabeled index sets. `labeled` keeps insertion order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolState {
    labeled: Vec<usize>,
    unlabeled: BTreeSet<usize>,
}

impl PoolState {
    pub fn new(labeled: Vec<usize>, unlabeled: BTreeSet<usize>, n: usize) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for &i in &labeled {
            if i >= n {
                return Err(Error::IndexOutOfRange(i));
            }
            if !seen.insert(i) || unlabeled.contains(&i) {
                return Err(Error::InvalidParameter(format!(
                    "index {i} appears twice in the pools"
                )));
            }
        }
        if let Some(&i) = unlabeled.iter().next_back() {
            if i >= n {
                return Err(Error::IndexOutOfRange(i));
            }
        }
        Ok(Self { labeled, unlabeled })
    }

    /// Everything in `pool` unlabeled.
    pub fn all_unlabeled(pool: impl IntoIterator<Item = usize>) -> Self {
        Self {
            labeled: Vec::new(),
            unlabeled: pool.into_iter().collect(),
        }
    }

    pub fn labeled(&self) -> &[usize] {
        &self.labeled
    }

    pub fn unlabeled(&self) -> &BTreeSet<usize> {
        &self.unlabeled
    }

    pub fn unlabeled_vec(&self) -> Vec<usize> {
        self.unlabeled.iter().copied().collect()
    }

    pub fn is_labeled(&self, i: usize) -> bool {
        self.labeled.contains(&i)
    }

    pub fn is_unlabeled(&self, i: usize) -> bool {
        self.unlabeled.contains(&i)
    }

    pub fn len(&self) -> usize {
        self.labeled.len() + self.unlabeled.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Moves `i` from the unlabeled to the labeled pool.
    pub fn transfer(&mut self, i: usize) -> Result<()> {
        if !self.unlabeled.remove(&i) {
            return Err(Error::NotUnlabeled(i));
        }
        self.labeled.push(i);
        Ok(())
    }
}
