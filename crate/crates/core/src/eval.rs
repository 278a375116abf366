//! Answer extraction and scoring: verifier accuracy, RMSE and ROUGE-L.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::DatasetError;
use crate::sample::InstructionSample;
use crate::graph::NodeId;
use crate::task::{normalize_label, AnswerKind, CanonicalAnswer, Metric, VerifyRule};
use crate::text::ANSWER_MARKER;

/// Version stamp of the ROUGE-L tokenization, written into reports.
pub const ROUGE_TOKENIZATION: &str = "lowercase; split on whitespace and punctuation; no stemming";
pub const WITNESS_POLICY: &str = "any valid optimal witness is accepted; a stated path must itself be valid";

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("predictions file is empty")]
    Empty,
    #[error("predictions for ids not in the split: {}", .0.join(", "))]
    UnknownIds(Vec<String>),
    #[error("duplicate prediction for id {0}")]
    Duplicate(String),
    #[error("no parseable numeric predictions for {0}")]
    NoParseable(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    pub prediction: String,
    /// Set when the request for this sample failed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Reads a predictions file; a first line carrying `_header` is skipped.
pub fn read_predictions(path: &Path) -> Result<Vec<Prediction>, EvalError> {
    let text = std::fs::read_to_string(path).map_err(|e| EvalError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(line).map_err(|e| EvalError::Malformed {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        if value.get("_header").is_some() {
            continue;
        }
        let p: Prediction = serde_json::from_value(value).map_err(|e| EvalError::Malformed {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(p);
    }
    Ok(out)
}

fn number_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"-?\d+(?:\.\d+)?(?:[eE][-+]?\d+)?").unwrap())
}

fn id_list_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)\d+(?:\s*(?:,\s*and|,|and)\s*\d+)*|\bnone\b").unwrap())
}

fn path_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\d+(?:\s*->\s*\d+)+").unwrap())
}

fn bool_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)\b(yes|no|true|false)\b").unwrap())
}

fn parse_ids(s: &str) -> Option<Vec<NodeId>> {
    let s = s.trim().trim_end_matches('.');
    if normalize_label(s) == "none" {
        return Some(Vec::new());
    }
    let mut ids = Vec::new();
    for part in s.split(|c: char| c == ',' || c.is_whitespace()) {
        let part = part.trim();
        if part.is_empty() || part.eq_ignore_ascii_case("and") {
            continue;
        }
        ids.push(part.parse().ok()?);
    }
    (!ids.is_empty()).then_some(ids)
}

fn parse_path(s: &str) -> Option<Vec<NodeId>> {
    let ids = s
        .split("->")
        .map(|p| p.trim().parse().ok())
        .collect::<Option<Vec<NodeId>>>()?;
    (ids.len() >= 2).then_some(ids)
}

fn parse_bool(s: &str) -> Option<bool> {
    match normalize_label(s).as_str() {
        "yes" | "true" => Some(true),
        "no" | "false" => Some(false),
        _ => None,
    }
}

/// Parses `s` as a whole under the grammar of `kind`.
fn parse_exact(s: &str, kind: &AnswerKind) -> Option<CanonicalAnswer> {
    let t = s.trim().trim_end_matches('.').trim();
    match kind {
        AnswerKind::Integer => t.parse().ok().map(CanonicalAnswer::Integer),
        AnswerKind::Real => t.parse::<f64>().ok().filter(|x| x.is_finite()).map(CanonicalAnswer::Real),
        AnswerKind::Boolean => parse_bool(t).map(CanonicalAnswer::Boolean),
        AnswerKind::NodeSet => parse_ids(t).map(CanonicalAnswer::node_set),
        AnswerKind::Sequence => parse_path(t).map(CanonicalAnswer::Sequence),
        AnswerKind::Label => {
            let l = normalize_label(t);
            (!l.is_empty()).then_some(CanonicalAnswer::Label(l))
        }
        AnswerKind::Text => Some(CanonicalAnswer::Text(s.trim().to_string())),
    }
}

/// Last substring of `s` matching the grammar of `kind`.
fn parse_search(s: &str, kind: &AnswerKind, labels: Option<&[String]>) -> Option<CanonicalAnswer> {
    match kind {
        AnswerKind::Integer => number_re()
            .find_iter(s)
            .filter_map(|m| m.as_str().parse().ok())
            .last()
            .map(CanonicalAnswer::Integer),
        AnswerKind::Real => number_re()
            .find_iter(s)
            .filter_map(|m| m.as_str().parse::<f64>().ok())
            .last()
            .map(CanonicalAnswer::Real),
        AnswerKind::Boolean => bool_re()
            .find_iter(s)
            .last()
            .and_then(|m| parse_bool(m.as_str()))
            .map(CanonicalAnswer::Boolean),
        AnswerKind::NodeSet => id_list_re()
            .find_iter(s)
            .filter_map(|m| parse_ids(m.as_str()))
            .last()
            .map(CanonicalAnswer::node_set),
        AnswerKind::Sequence => last_path(s).map(CanonicalAnswer::Sequence),
        AnswerKind::Label => {
            let lower = s.to_lowercase();
            let labels = labels?;
            labels
                .iter()
                .filter_map(|l| {
                    let l = normalize_label(l);
                    last_token_match(&lower, &l).map(|at| (at, l))
                })
                .max_by_key(|(at, l)| (*at, l.len()))
                .map(|(_, l)| CanonicalAnswer::Label(l))
        }
        AnswerKind::Text => Some(CanonicalAnswer::Text(s.trim().to_string())),
    }
}

fn last_token_match(hay: &str, needle: &str) -> Option<usize> {
    if needle.is_empty() {
        return None;
    }
    let word = |c: char| c.is_alphanumeric() || c == '_';
    hay.match_indices(needle)
        .filter(|(i, _)| {
            !hay[..*i].chars().next_back().is_some_and(word)
                && !hay[i + needle.len()..].chars().next().is_some_and(word)
        })
        .map(|(i, _)| i)
        .last()
}

fn last_path(s: &str) -> Option<Vec<NodeId>> {
    path_re().find_iter(s).filter_map(|m| parse_path(m.as_str())).last()
}

/// Text after the last line-initial `Answer:` marker. For text answers the
/// remainder runs to the end of the generation; otherwise to the end of the line.
fn answer_line<'a>(raw: &'a str, kind: &AnswerKind) -> Option<&'a str> {
    let mut found = None;
    let mut offset = 0;
    for line in raw.split_inclusive('\n') {
        let trimmed = line.trim_start();
        if trimmed.len() >= ANSWER_MARKER.len() && trimmed[..ANSWER_MARKER.len()].eq_ignore_ascii_case(ANSWER_MARKER) {
            let start = offset + (line.len() - trimmed.len()) + ANSWER_MARKER.len();
            let end = if *kind == AnswerKind::Text { raw.len() } else { offset + line.len() };
            found = Some(&raw[start..end]);
        }
        offset += line.len();
    }
    found
}

/// Extracts an answer of the expected kind, or `None` when unparseable.
pub fn extract_answer(raw: &str, kind: &AnswerKind, labels: Option<&[String]>) -> Option<CanonicalAnswer> {
    match answer_line(raw, kind) {
        Some(line) => parse_exact(line, kind).or_else(|| parse_search(line, kind, labels)),
        None => {
            if *kind == AnswerKind::Label {
                if let Some(a) = parse_search(raw, kind, labels) {
                    return Some(a);
                }
                // no label set: the last nonblank line is the label
                return raw.lines().rev().find(|l| !l.trim().is_empty()).and_then(|l| parse_exact(l, kind));
            }
            parse_search(raw, kind, labels)
        }
    }
}

/// Correctness under the sample's verifier. A path stated anywhere in the
/// text must itself be valid when the verifier checks witnesses.
pub fn judge(raw: &str, expected: &CanonicalAnswer, rule: &VerifyRule, labels: Option<&[String]>) -> (bool, bool) {
    let kind = expected.kind();
    let parsed = extract_answer(raw, &kind, labels);
    let witness = if rule.checks_witness() { last_path(raw) } else { None };
    match (parsed, witness) {
        (Some(a), Some(w)) => (true, rule.accepts(expected, &a) && rule.accepts(expected, &CanonicalAnswer::Sequence(w))),
        (Some(a), None) => (true, rule.accepts(expected, &a)),
        (None, Some(w)) => (true, rule.accepts(expected, &CanonicalAnswer::Sequence(w))),
        (None, None) => (false, false),
    }
}

/// Tokens for ROUGE-L: lowercase alphanumeric runs.
pub fn rouge_tokens(s: &str) -> Vec<String> {
    s.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { cur[j].max(prev[j + 1]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RougeScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

pub fn rouge_l(pred: &str, reference: &str) -> RougeScore {
    let (p, r) = (rouge_tokens(pred), rouge_tokens(reference));
    let lcs = lcs_len(&p, &r) as f64;
    let precision = if p.is_empty() { 0.0 } else { lcs / p.len() as f64 };
    let recall = if r.is_empty() { 0.0 } else { lcs / r.len() as f64 };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    RougeScore { precision, recall, f1 }
}

/// Root mean squared error over aligned pairs.
pub fn rmse(preds: &[f64], refs: &[f64]) -> Result<f64, EvalError> {
    if preds.is_empty() || preds.len() != refs.len() {
        return Err(EvalError::NoParseable(format!("{} predictions against {} references", preds.len(), refs.len())));
    }
    let sum: f64 = preds.iter().zip(refs).map(|(p, r)| (p - r) * (p - r)).sum();
    Ok((sum / preds.len() as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub id: String,
    pub task: String,
    pub format: String,
    pub metric: Metric,
    pub parsed: bool,
    /// Verifier verdict for accuracy tasks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correct: Option<bool>,
    /// Absolute error for RMSE tasks, F1 for ROUGE-L tasks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub metric: Metric,
    pub value: f64,
    pub n: usize,
    pub n_unparseable: usize,
    /// Fraction of samples with a parseable answer.
    pub coverage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub split: String,
    pub rouge_tokenization: String,
    pub witness_policy: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub penalize_unparseable: Option<f64>,
    pub per_task: BTreeMap<String, MetricSummary>,
    pub aggregate: BTreeMap<String, MetricSummary>,
    pub missing: Vec<String>,
    pub samples: Vec<Verdict>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EvalOptions {
    /// Absolute error charged for unparseable RMSE predictions instead of excluding them.
    pub penalize_unparseable: Option<f64>,
}

fn score_sample(s: &InstructionSample, raw: Option<&str>) -> Verdict {
    let m = &s.meta;
    let mut v = Verdict {
        id: s.id.clone(),
        task: s.report_key(),
        format: s.format.clone(),
        metric: m.metric,
        parsed: false,
        correct: None,
        score: None,
    };
    let Some(raw) = raw else {
        if m.metric == Metric::Accuracy {
            v.correct = Some(false);
        }
        return v;
    };
    match m.metric {
        Metric::Accuracy => {
            let (parsed, ok) = judge(raw, &m.answer, &m.verifier, m.labels.as_deref());
            v.parsed = parsed;
            v.correct = Some(ok);
        }
        Metric::Rmse => {
            let kind = match m.answer.kind() {
                AnswerKind::Integer => AnswerKind::Real,
                k => k,
            };
            if let (Some(p), Some(r)) = (extract_answer(raw, &kind, None).and_then(|a| a.as_f64()), m.answer.as_f64()) {
                v.parsed = true;
                v.score = Some((p - r).abs());
            }
        }
        Metric::RougeL => {
            let reference = m.answer.render();
            if let Some(CanonicalAnswer::Text(t) | CanonicalAnswer::Label(t)) = extract_answer(raw, &AnswerKind::Text, None) {
                v.parsed = true;
                v.score = Some(rouge_l(&t, &reference).f1);
            }
        }
    }
    v
}

fn summarize(metric: Metric, verdicts: &[&Verdict], opts: &EvalOptions, key: &str) -> Result<MetricSummary, EvalError> {
    let n = verdicts.len();
    let n_unparseable = verdicts.iter().filter(|v| !v.parsed).count();
    let value = match metric {
        Metric::Accuracy => {
            verdicts.iter().filter(|v| v.correct == Some(true)).count() as f64 / n.max(1) as f64
        }
        Metric::Rmse => {
            let errs: Vec<f64> = verdicts
                .iter()
                .filter_map(|v| v.score.or(opts.penalize_unparseable))
                .collect();
            rmse(&errs, &vec![0.0; errs.len()]).map_err(|_| EvalError::NoParseable(key.to_string()))?
        }
        Metric::RougeL => verdicts.iter().map(|v| v.score.unwrap_or(0.0)).sum::<f64>() / n.max(1) as f64,
    };
    Ok(MetricSummary {
        metric,
        value,
        n,
        n_unparseable,
        coverage: if n == 0 { 0.0 } else { (n - n_unparseable) as f64 / n as f64 },
    })
}

/// Scores `preds` against the samples of one split.
pub fn evaluate(
    split: &str,
    samples: &[InstructionSample],
    preds: &[Prediction],
    opts: &EvalOptions,
) -> Result<ScoreReport, EvalError> {
    if preds.is_empty() {
        return Err(EvalError::Empty);
    }
    let known: HashSet<&str> = samples.iter().map(|s| s.id.as_str()).collect();
    let mut by_id: HashMap<&str, &str> = HashMap::with_capacity(preds.len());
    let mut unknown = Vec::new();
    for p in preds {
        if !known.contains(p.id.as_str()) {
            unknown.push(p.id.clone());
        } else if by_id.insert(&p.id, &p.prediction).is_some() {
            return Err(EvalError::Duplicate(p.id.clone()));
        }
    }
    if !unknown.is_empty() {
        unknown.sort();
        return Err(EvalError::UnknownIds(unknown));
    }
    let mut ordered: Vec<&InstructionSample> = samples.iter().collect();
    ordered.sort_by(|a, b| a.id.cmp(&b.id));
    let missing: Vec<String> = ordered
        .iter()
        .filter(|s| !by_id.contains_key(s.id.as_str()))
        .map(|s| s.id.clone())
        .collect();
    let verdicts: Vec<Verdict> = ordered
        .par_iter()
        .map(|s| score_sample(s, by_id.get(s.id.as_str()).copied()))
        .collect();

    let mut metrics_of: BTreeMap<&str, HashSet<Metric>> = BTreeMap::new();
    for v in &verdicts {
        metrics_of.entry(&v.task).or_default().insert(v.metric);
    }
    let mut groups: BTreeMap<String, (Metric, Vec<&Verdict>)> = BTreeMap::new();
    let mut totals: BTreeMap<String, (Metric, Vec<&Verdict>)> = BTreeMap::new();
    for v in &verdicts {
        let key = if metrics_of[v.task.as_str()].len() > 1 {
            format!("{} [{}]", v.task, v.metric.name())
        } else {
            v.task.clone()
        };
        groups.entry(key).or_insert_with(|| (v.metric, Vec::new())).1.push(v);
        totals
            .entry(v.metric.name().to_string())
            .or_insert_with(|| (v.metric, Vec::new()))
            .1
            .push(v);
    }
    let per_task = groups
        .iter()
        .map(|(k, (m, vs))| Ok((k.clone(), summarize(*m, vs, opts, k)?)))
        .collect::<Result<BTreeMap<_, _>, EvalError>>()?;
    let aggregate = totals
        .iter()
        .map(|(k, (m, vs))| Ok((k.clone(), summarize(*m, vs, opts, k)?)))
        .collect::<Result<BTreeMap<_, _>, EvalError>>()?;
    Ok(ScoreReport {
        split: split.to_string(),
        rouge_tokenization: ROUGE_TOKENIZATION.into(),
        witness_policy: WITNESS_POLICY.into(),
        penalize_unparseable: opts.penalize_unparseable,
        per_task,
        aggregate,
        missing,
        samples: verdicts,
    })
}

/// Renders rows as a left-aligned text table with a dashed rule under the header.
pub fn render_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        let mut s = String::new();
        for (i, (c, w)) in cells.iter().zip(&widths).enumerate() {
            if i > 0 {
                s.push_str("  ");
            }
            let _ = write!(s, "{c:<w$}");
        }
        s.trim_end().to_string() + "\n"
    };
    let mut out = line(header.to_vec());
    out += &line(widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().iter().map(String::as_str).collect());
    for r in rows {
        out += &line(r.iter().map(String::as_str).collect());
    }
    out
}

impl ScoreReport {
    pub fn table(&self) -> String {
        let row = |k: &str, s: &MetricSummary| {
            vec![
                k.to_string(),
                s.metric.name().to_string(),
                format!("{:.4}", s.value),
                s.n.to_string(),
                s.n_unparseable.to_string(),
            ]
        };
        let mut rows: Vec<Vec<String>> = self.per_task.iter().map(|(k, s)| row(k, s)).collect();
        rows.extend(self.aggregate.iter().map(|(k, s)| row(&format!("all [{k}]"), s)));
        let mut out = render_table(&["task", "metric", "value", "n", "unparseable"], &rows);
        if !self.missing.is_empty() {
            let _ = writeln!(out, "missing predictions: {}", self.missing.len());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extraction_examples() {
        assert_eq!(
            extract_answer("some reasoning\nAnswer: 42", &AnswerKind::Integer, None),
            Some(CanonicalAnswer::Integer(42))
        );
        assert_eq!(
            extract_answer("Yes, because the path exists.", &AnswerKind::Boolean, None),
            Some(CanonicalAnswer::Boolean(true))
        );
        assert_eq!(extract_answer("no digits here", &AnswerKind::Integer, None), None);
        assert_eq!(
            extract_answer("Answer: 3, 1 and 2", &AnswerKind::NodeSet, None),
            Some(CanonicalAnswer::NodeSet(vec![1, 2, 3]))
        );
        assert_eq!(
            extract_answer("the walk is 0 -> 4 -> 2.", &AnswerKind::Sequence, None),
            Some(CanonicalAnswer::Sequence(vec![0, 4, 2]))
        );
        assert_eq!(
            extract_answer("Answer: Economics.", &AnswerKind::Label, None),
            Some(CanonicalAnswer::Label("economics".into()))
        );
    }

    #[test]
    fn answer_line_beats_earlier_numbers() {
        let raw = "Nodes 3 and 9 matter.\nAnswer: no path";
        assert_eq!(extract_answer(raw, &AnswerKind::Integer, None), None);
    }

    #[test]
    fn labels_found_without_marker() {
        let labels = vec!["physics".to_string(), "economics".to_string()];
        assert_eq!(
            extract_answer("I think it is Physics, not economics... final: physics", &AnswerKind::Label, Some(&labels)),
            Some(CanonicalAnswer::Label("physics".into()))
        );
    }

    #[test]
    fn rouge_examples() {
        let s = rouge_l("the cat sat", "the cat");
        assert!((s.precision - 2.0 / 3.0).abs() < 1e-12);
        assert!((s.recall - 1.0).abs() < 1e-12);
        assert!((s.f1 - 0.8).abs() < 1e-9);
        assert_eq!(rouge_l("a b", "c d").f1, 0.0);
        assert_eq!(rouge_l("", "").f1, 0.0);
        assert_eq!(rouge_l("Same, text!", "same text").f1, 1.0);
    }

    #[test]
    fn rmse_example() {
        assert!((rmse(&[1.0, 2.0], &[1.0, 4.0]).unwrap() - 2f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn table_is_aligned() {
        let t = render_table(&["a", "bb"], &[vec!["long".into(), "1".into()]]);
        assert_eq!(t, "a     bb\n----  --\nlong  1\n");
    }
}
