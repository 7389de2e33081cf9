//! Parsing and rendering: ARC JSON task files, grid-to-text serialization
//! in numpy's default array printing shape, prompt assembly with segment
//! spans, and training-record encoding with character-offset loss masks.

use crate::grid::{Example, ExamplePair, Grid, GridError, Split, Task, TaskError, TaskSet};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CodecError {
    #[error("parse error{}: {msg}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Parse { line: Option<usize>, msg: String },
    #[error("no parseable grid in model output: {0}")]
    MalformedPrediction(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Task(#[from] TaskError),
}

fn parse_err(msg: impl Into<String>) -> CodecError {
    CodecError::Parse { line: None, msg: msg.into() }
}

/// Renders a grid the way numpy prints an integer array: rows as bracketed,
/// space-separated digit lists, continuation rows indented by one space.
///
/// `[[1 2]\n [3 4]]`
pub fn render_grid_text(g: &Grid) -> String {
    let mut out = String::with_capacity(g.rows() * (2 * g.cols() + 4));
    out.push('[');
    for r in 0..g.rows() {
        if r > 0 {
            out.push_str("\n ");
        }
        out.push('[');
        for c in 0..g.cols() {
            if c > 0 {
                out.push(' ');
            }
            out.push((b'0' + g.get(r, c).value()) as char);
        }
        out.push(']');
    }
    out.push(']');
    out
}

/// Parses a rendered grid back out of arbitrary model output. Leading
/// whitespace and trailing prose after the closing bracket are tolerated;
/// leading prose is not.
pub fn parse_grid_text(s: &str) -> Result<Grid, CodecError> {
    let s = s.trim_start();
    let bytes = s.as_bytes();
    if bytes.first() != Some(&b'[') {
        return Err(CodecError::MalformedPrediction("output does not start with '['".into()));
    }
    // Find the matching close of the outer bracket.
    let mut depth = 0usize;
    let mut end = None;
    for (i, &b) in bytes.iter().enumerate() {
        match b {
            b'[' => {
                depth += 1;
                if depth > 2 {
                    return Err(CodecError::MalformedPrediction("brackets nested deeper than 2".into()));
                }
            }
            b']' => {
                if depth == 0 {
                    return Err(CodecError::MalformedPrediction("unbalanced ']'".into()));
                }
                depth -= 1;
                if depth == 0 {
                    end = Some(i);
                    break;
                }
            }
            _ => {}
        }
    }
    let end = end.ok_or_else(|| CodecError::MalformedPrediction("unclosed grid".into()))?;
    let body = &s[1..end];

    let mut rows: Vec<Vec<u8>> = Vec::new();
    let mut rest = body;
    loop {
        rest = rest.trim_start_matches(|c: char| c.is_whitespace() || c == ',');
        if rest.is_empty() {
            break;
        }
        let Some(stripped) = rest.strip_prefix('[') else {
            return Err(CodecError::MalformedPrediction("expected '[' opening a row".into()));
        };
        let Some(close) = stripped.find(']') else {
            return Err(CodecError::MalformedPrediction("unclosed row".into()));
        };
        let row_text = &stripped[..close];
        let mut row = Vec::new();
        for token in row_text.split(|c: char| c.is_whitespace() || c == ',').filter(|t| !t.is_empty()) {
            let v: u8 = token
                .parse()
                .map_err(|_| CodecError::MalformedPrediction(format!("bad cell token {token:?}")))?;
            row.push(v);
        }
        if row.is_empty() {
            return Err(CodecError::MalformedPrediction("empty row".into()));
        }
        rows.push(row);
        rest = &stripped[close + 1..];
    }
    if rows.is_empty() {
        return Err(CodecError::MalformedPrediction("no rows".into()));
    }
    Grid::new(&rows).map_err(|e| CodecError::MalformedPrediction(e.to_string()))
}

/// Parses ARC task JSON. Accepts a single-task document (`{"train": ...,
/// "test": ...}`, id taken from `default_id`) or a map of task ids to such
/// documents.
pub fn parse_arc_json(bytes: &[u8], default_id: &str, split: Split) -> Result<TaskSet, CodecError> {
    let value: serde_json::Value = serde_json::from_slice(bytes).map_err(|e| CodecError::Parse {
        line: Some(e.line()),
        msg: e.to_string(),
    })?;
    let obj = value.as_object().ok_or_else(|| parse_err("top-level JSON must be an object"))?;
    let mut tasks = Vec::new();
    if obj.contains_key("train") && obj.contains_key("test") {
        tasks.push(parse_task(default_id, &value)?);
    } else {
        for (id, task_value) in obj {
            tasks.push(parse_task(id, task_value)?);
        }
    }
    Ok(TaskSet::new(split, tasks)?)
}

fn parse_task(id: &str, value: &serde_json::Value) -> Result<Task, CodecError> {
    #[derive(Deserialize)]
    struct RawPair {
        input: Vec<Vec<u8>>,
        output: Option<Vec<Vec<u8>>>,
    }
    #[derive(Deserialize)]
    struct RawTask {
        train: Vec<RawPair>,
        test: Vec<RawPair>,
    }
    let raw: RawTask = serde_json::from_value(value.clone())
        .map_err(|e| parse_err(format!("task {id}: {e}")))?;
    let train = raw
        .train
        .iter()
        .map(|p| {
            let output = p
                .output
                .as_ref()
                .ok_or_else(|| parse_err(format!("task {id}: train example missing output")))?;
            Ok(Example { input: Grid::new(&p.input)?, output: Grid::new(output)? })
        })
        .collect::<Result<Vec<_>, CodecError>>()?;
    let test = raw
        .test
        .iter()
        .map(|p| {
            Ok(ExamplePair {
                input: Grid::new(&p.input)?,
                output: p.output.as_ref().map(|o| Grid::new(o)).transpose()?,
            })
        })
        .collect::<Result<Vec<_>, CodecError>>()?;
    Ok(Task::new(id, train, test)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SegmentKind {
    DemoInput,
    DemoOutput,
    TestInput,
    TestOutput,
    Delimiter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub start: usize,
    pub end: usize,
    pub kind: SegmentKind,
}

/// Prompt text plus the byte spans of every payload and delimiter in it.
/// Segments are ordered, non-overlapping, and cover the whole text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptText {
    pub text: String,
    pub segments: Vec<Segment>,
}

impl PromptText {
    pub fn from_plain(text: String) -> Self {
        let seg = Segment { start: 0, end: text.len(), kind: SegmentKind::Delimiter };
        PromptText { text, segments: vec![seg] }
    }

    pub fn slice(&self, seg: &Segment) -> &str {
        &self.text[seg.start..seg.end]
    }

    pub fn segments_of(&self, kind: SegmentKind) -> impl Iterator<Item = &Segment> {
        self.segments.iter().filter(move |s| s.kind == kind)
    }
}

struct PromptBuilder {
    text: String,
    segments: Vec<Segment>,
}

impl PromptBuilder {
    fn new() -> Self {
        PromptBuilder { text: String::new(), segments: Vec::new() }
    }

    fn push(&mut self, kind: SegmentKind, s: &str) {
        let start = self.text.len();
        self.text.push_str(s);
        self.segments.push(Segment { start, end: self.text.len(), kind });
    }

    fn push_grid(&mut self, kind: SegmentKind, g: &Grid) {
        let rendered = render_grid_text(g);
        self.push(kind, &rendered);
    }

    fn finish(self) -> PromptText {
        PromptText { text: self.text, segments: self.segments }
    }
}

/// Renders a few-shot prompt: each demonstration as an input/output block,
/// then the test input with a trailing `output:` label the model continues
/// from. Demos may be empty (end-to-end records).
pub fn render_prompt(demos: &[Example], test_input: &Grid) -> PromptText {
    let mut b = PromptBuilder::new();
    for demo in demos {
        b.push(SegmentKind::Delimiter, "input:\n");
        b.push_grid(SegmentKind::DemoInput, &demo.input);
        b.push(SegmentKind::Delimiter, "\noutput:\n");
        b.push_grid(SegmentKind::DemoOutput, &demo.output);
        b.push(SegmentKind::Delimiter, "\n");
    }
    b.push(SegmentKind::Delimiter, "input:\n");
    b.push_grid(SegmentKind::TestInput, test_input);
    b.push(SegmentKind::Delimiter, "\noutput:\n");
    b.finish()
}

/// Loss-mask mode: loss on demonstration outputs from the second one on
/// plus the test output, or on the test output alone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossMode {
    Demos,
    TestOnly,
}

/// Where a training record came from: which leave-one-out split, which
/// demo permutation, and which transform produced it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub loo_index: usize,
    pub transform: String,
    pub perm_index: usize,
}

/// One serialized training instance: prompt text with character-offset
/// loss spans. Character offsets keep the record tokenizer-agnostic; the
/// external trainer maps them to token ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TttRecord {
    pub task_id: String,
    pub prompt: String,
    pub loss_spans: Vec<(usize, usize)>,
    pub source: Provenance,
    pub loss_mode: LossMode,
}

/// Builds a training record. The prompt is the few-shot rendering followed
/// by the test output grid, and the loss spans cover exactly the segments
/// the mode demands.
pub fn encode_ttt_record(
    demos: &[Example],
    test_example: &Example,
    loss_mode: LossMode,
    task_id: &str,
    source: Provenance,
) -> TttRecord {
    let (prompt, loss_spans) = encode_ttt_prompt(demos, test_example, loss_mode);
    TttRecord { task_id: task_id.to_string(), prompt: prompt.text, loss_spans, source, loss_mode }
}

/// As `encode_ttt_record` but keeps the segment spans, for callers that
/// need them (span verification, mock prediction).
pub fn encode_ttt_prompt(
    demos: &[Example],
    test_example: &Example,
    loss_mode: LossMode,
) -> (PromptText, Vec<(usize, usize)>) {
    let mut prompt = render_prompt(demos, &test_example.input);
    let start = prompt.text.len();
    let rendered = render_grid_text(&test_example.output);
    prompt.text.push_str(&rendered);
    prompt.segments.push(Segment { start, end: prompt.text.len(), kind: SegmentKind::TestOutput });
    let nl = prompt.text.len();
    prompt.text.push('\n');
    prompt.segments.push(Segment { start: nl, end: prompt.text.len(), kind: SegmentKind::Delimiter });

    let mut loss_spans = Vec::new();
    if loss_mode == LossMode::Demos {
        // Loss on demonstration outputs starting from the second one.
        for seg in prompt.segments_of(SegmentKind::DemoOutput).skip(1) {
            loss_spans.push((seg.start, seg.end));
        }
    }
    let test_out = prompt
        .segments_of(SegmentKind::TestOutput)
        .next()
        .expect("test output segment present");
    loss_spans.push((test_out.start, test_out.end));
    (prompt, loss_spans)
}

/// Serializes records to JSONL, one object per line.
pub fn write_jsonl(records: &[TttRecord]) -> Vec<u8> {
    let mut out = Vec::new();
    for r in records {
        serde_json::to_writer(&mut out, r).expect("record serialization cannot fail");
        out.push(b'\n');
    }
    out
}

/// Reads JSONL records, reporting the 1-based line of any violation.
pub fn read_jsonl(bytes: &[u8]) -> Result<Vec<TttRecord>, CodecError> {
    let text = std::str::from_utf8(bytes).map_err(|e| parse_err(format!("not UTF-8: {e}")))?;
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(line).map_err(|e| CodecError::Parse {
            line: Some(i + 1),
            msg: e.to_string(),
        })?;
        records.push(record);
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn g(m: &[Vec<u8>]) -> Grid {
        Grid::new(m).unwrap()
    }

    #[test]
    fn render_minimal() {
        assert_eq!(render_grid_text(&g(&[vec![5]])), "[[5]]");
    }

    #[test]
    fn render_canonical_shape() {
        assert_eq!(render_grid_text(&g(&[vec![1, 2], vec![3, 4]])), "[[1 2]\n [3 4]]");
        assert_eq!(
            render_grid_text(&g(&[vec![0, 9, 3], vec![1, 1, 1], vec![7, 0, 2]])),
            "[[0 9 3]\n [1 1 1]\n [7 0 2]]"
        );
    }

    #[test]
    fn parse_inverse_of_render() {
        let parsed = parse_grid_text("[[1 2]\n [3 4]]").unwrap();
        assert_eq!(parsed, g(&[vec![1, 2], vec![3, 4]]));
    }

    #[test]
    fn parse_tolerates_trailing_prose() {
        let parsed = parse_grid_text("[[1 2]\n [3 4]] The answer is above.").unwrap();
        assert_eq!(parsed, g(&[vec![1, 2], vec![3, 4]]));
        let parsed = parse_grid_text("  \n[[7]]").unwrap();
        assert_eq!(parsed, g(&[vec![7]]));
    }

    #[test]
    fn parse_rejects_leading_prose_and_ragged() {
        assert!(matches!(parse_grid_text("sure! [[1]]"), Err(CodecError::MalformedPrediction(_))));
        assert!(matches!(parse_grid_text("[[1 2]\n [3]]"), Err(CodecError::MalformedPrediction(_))));
        assert!(matches!(parse_grid_text(""), Err(CodecError::MalformedPrediction(_))));
        assert!(matches!(parse_grid_text("[[12]]"), Err(CodecError::MalformedPrediction(_))));
        assert!(matches!(parse_grid_text("[[1 2]"), Err(CodecError::MalformedPrediction(_))));
    }

    #[test]
    fn arc_json_single_task() {
        let doc = br#"{"train":[{"input":[[1]],"output":[[2]]}],"test":[{"input":[[3]],"output":[[4]]}]}"#;
        let set = parse_arc_json(doc, "mytask", Split::Unknown).unwrap();
        assert_eq!(set.len(), 1);
        let task = &set.tasks[0];
        assert_eq!(task.id, "mytask");
        assert_eq!(task.train.len(), 1);
        assert_eq!(task.test.len(), 1);
        assert_eq!(task.test[0].output, Some(g(&[vec![4]])));
    }

    #[test]
    fn arc_json_map_and_optional_test_output() {
        let doc = br#"{
            "a": {"train":[{"input":[[1]],"output":[[2]]}],"test":[{"input":[[3]]}]},
            "b": {"train":[{"input":[[0]],"output":[[0]]}],"test":[{"input":[[1]],"output":[[1]]}]}
        }"#;
        let set = parse_arc_json(doc, "ignored", Split::Validation).unwrap();
        assert_eq!(set.len(), 2);
        assert_eq!(set.get("a").unwrap().test[0].output, None);
    }

    #[test]
    fn arc_json_malformed_reports_line() {
        let doc = b"{\n \"a\": nope\n}";
        match parse_arc_json(doc, "x", Split::Unknown) {
            Err(CodecError::Parse { line: Some(l), .. }) => assert_eq!(l, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn prompt_structure() {
        let demos = vec![
            Example { input: g(&[vec![1]]), output: g(&[vec![2]]) },
            Example { input: g(&[vec![3]]), output: g(&[vec![4]]) },
        ];
        let p = render_prompt(&demos, &g(&[vec![5]]));
        let kinds: Vec<SegmentKind> = p
            .segments
            .iter()
            .filter(|s| s.kind != SegmentKind::Delimiter)
            .map(|s| s.kind)
            .collect();
        assert_eq!(
            kinds,
            vec![
                SegmentKind::DemoInput,
                SegmentKind::DemoOutput,
                SegmentKind::DemoInput,
                SegmentKind::DemoOutput,
                SegmentKind::TestInput,
            ]
        );
        // Spans cover the whole text contiguously.
        let mut pos = 0;
        for seg in &p.segments {
            assert_eq!(seg.start, pos);
            pos = seg.end;
        }
        assert_eq!(pos, p.text.len());
        // Slicing a demo-output span reproduces the rendering of that output.
        let outs: Vec<&Segment> = p.segments_of(SegmentKind::DemoOutput).collect();
        assert_eq!(p.slice(outs[0]), render_grid_text(&demos[0].output));
        assert_eq!(p.slice(outs[1]), render_grid_text(&demos[1].output));
    }

    #[test]
    fn prompt_zero_demos() {
        let p = render_prompt(&[], &g(&[vec![1]]));
        assert_eq!(p.segments_of(SegmentKind::DemoInput).count(), 0);
        assert_eq!(p.segments_of(SegmentKind::TestInput).count(), 1);
        assert_eq!(p.text, "input:\n[[1]]\noutput:\n");
    }

    fn demo(i: u8) -> Example {
        Example { input: g(&[vec![i]]), output: g(&[vec![9 - i]]) }
    }

    #[test]
    fn loss_spans_with_demos() {
        let demos = vec![demo(1), demo(2), demo(3)];
        let test = demo(4);
        let r = encode_ttt_record(&demos, &test, LossMode::Demos, "t", prov());
        assert_eq!(r.loss_spans.len(), 3); // demo outputs 2, 3 plus test output
        for &(a, b) in &r.loss_spans {
            assert!(parse_grid_text(&r.prompt[a..b]).is_ok());
        }
    }

    #[test]
    fn loss_spans_test_only() {
        let demos = vec![demo(1), demo(2), demo(3)];
        let r = encode_ttt_record(&demos, &demo(4), LossMode::TestOnly, "t", prov());
        assert_eq!(r.loss_spans.len(), 1);
        let (a, b) = r.loss_spans[0];
        assert_eq!(&r.prompt[a..b], render_grid_text(&demo(4).output));
        assert_eq!(b, r.prompt.len() - 1); // trailing newline after the target
    }

    #[test]
    fn loss_spans_single_demo_empty_sum() {
        let r = encode_ttt_record(&[demo(1)], &demo(2), LossMode::Demos, "t", prov());
        assert_eq!(r.loss_spans.len(), 1);
    }

    fn prov() -> Provenance {
        Provenance { loo_index: 0, transform: "Identity".into(), perm_index: 0 }
    }

    #[test]
    fn jsonl_round_trip_and_errors() {
        let records: Vec<TttRecord> = (0..10)
            .map(|i| encode_ttt_record(&[demo(1), demo(2)], &demo(3), LossMode::Demos, &format!("t{i}"), prov()))
            .collect();
        let bytes = write_jsonl(&records);
        let back = read_jsonl(&bytes).unwrap();
        assert_eq!(back, records);
        // Byte stability.
        assert_eq!(write_jsonl(&back), bytes);
        // Empty input.
        assert!(read_jsonl(b"").unwrap().is_empty());
        // Missing field names the line.
        let broken = br#"{"task_id":"a","prompt":"x","source":{"loo_index":0,"transform":"Identity","perm_index":0},"loss_mode":"demos"}"#;
        match read_jsonl(broken) {
            Err(CodecError::Parse { line: Some(1), msg }) => assert!(msg.contains("loss_spans"), "{msg}"),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    proptest! {
        #[test]
        fn grid_text_round_trip(rows in 1usize..12, cols in 1usize..12, seed in 0u64..10_000) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let m: Vec<Vec<u8>> = (0..rows).map(|_| (0..cols).map(|_| rng.gen_range(0..=9)).collect()).collect();
            let grid = g(&m);
            prop_assert_eq!(parse_grid_text(&render_grid_text(&grid)).unwrap(), grid);
        }
    }
}
