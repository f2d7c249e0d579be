//! CoNLL-U reading, validation and writing.
//!
//! Only the columns the augmentation and tagging code need are interpreted
//! (`ID`, `FORM`, `UPOS`, `HEAD`, `DEPREL`); everything else is carried as
//! opaque text. Multiword-token ranges (`1-2`) and empty nodes (`1.1`) are kept
//! verbatim, anchored to their position among the regular tokens, so that a
//! parsed file serializes back to the same bytes.

use std::fmt;

use thiserror::Error;

/// One regular (integer-id) token row.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Token {
    pub id: usize,
    pub form: String,
    pub lemma: String,
    pub upos: String,
    pub xpos: String,
    pub feats: String,
    /// `0` attaches the token to the virtual root.
    pub head: usize,
    pub deprel: String,
    pub deps: String,
    pub misc: String,
}

impl Token {
    /// A token with `_` in every opaque column.
    pub fn new(id: usize, form: &str, upos: &str, head: usize, deprel: &str) -> Self {
        Token {
            id,
            form: form.to_owned(),
            lemma: "_".to_owned(),
            upos: upos.to_owned(),
            xpos: "_".to_owned(),
            feats: "_".to_owned(),
            head,
            deprel: deprel.to_owned(),
            deps: "_".to_owned(),
            misc: "_".to_owned(),
        }
    }

    fn write_row(&self, out: &mut String) {
        use fmt::Write;
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.id,
            self.form,
            self.lemma,
            self.upos,
            self.xpos,
            self.feats,
            self.head,
            self.deprel,
            self.deps,
            self.misc
        );
    }
}

/// A raw line that is not a regular token row: a multiword-token range, an
/// empty node, or a comment that appeared after the first token.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct NonstandardLine {
    /// Number of regular tokens that precede this line.
    pub position: usize,
    pub line: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Sentence {
    pub tokens: Vec<Token>,
    /// Comment lines, verbatim including the leading `#`.
    pub comments: Vec<String>,
    pub nonstandard_lines: Vec<NonstandardLine>,
}

impl Sentence {
    pub fn new(tokens: Vec<Token>) -> Self {
        Sentence {
            tokens,
            comments: Vec::new(),
            nonstandard_lines: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Token with the given 1-based id, assuming contiguous ids.
    pub fn token(&self, id: usize) -> Option<&Token> {
        id.checked_sub(1).and_then(|i| self.tokens.get(i))
    }

    pub fn forms(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(|t| t.form.as_str())
    }

    /// Surface forms joined by single spaces.
    pub fn text(&self) -> String {
        self.forms().collect::<Vec<_>>().join(" ")
    }

    /// Whether the sentence carries multiword ranges or empty nodes, which
    /// have no defined reindexing under crop or rotate.
    pub fn has_nonstandard_lines(&self) -> bool {
        !self.nonstandard_lines.is_empty()
    }

    pub fn validate(&self) -> ValidationReport {
        validate_sentence(self)
    }

    /// Valid and free of multiword ranges/empty nodes.
    pub fn is_augmentation_eligible(&self) -> bool {
        !self.has_nonstandard_lines() && self.validate().is_valid()
    }

    /// Value of the first `# key = value` comment.
    pub fn comment_value(&self, key: &str) -> Option<&str> {
        self.comments.iter().find_map(|c| {
            let (k, v) = c.strip_prefix('#')?.split_once('=')?;
            (k.trim() == key).then(|| v.trim())
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("line {line}: {kind}")]
pub struct ParseError {
    /// 1-based line number in the input.
    pub line: usize,
    pub kind: ParseErrorKind,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("input is not valid UTF-8")]
    InvalidUtf8,
    #[error("expected 10 tab-separated columns, found {0}")]
    ColumnCount(usize),
    #[error("token id {0:?} is not a positive integer")]
    InvalidId(String),
    #[error("head {0:?} is not a non-negative integer")]
    InvalidHead(String),
}

/// Parses raw bytes, rejecting invalid UTF-8 with a structured error.
pub fn parse_conllu_bytes(bytes: &[u8]) -> Result<Vec<Sentence>, ParseError> {
    match std::str::from_utf8(bytes) {
        Ok(text) => parse_conllu(text),
        Err(e) => {
            let line = bytes[..e.valid_up_to()]
                .iter()
                .filter(|&&b| b == b'\n')
                .count()
                + 1;
            Err(ParseError {
                line,
                kind: ParseErrorKind::InvalidUtf8,
            })
        }
    }
}

/// Parses a CoNLL-U document. LF and CRLF line endings are accepted.
///
/// Structural problems inside a sentence (dangling heads, cycles, several
/// roots) are not parse errors; check them with [`validate_sentence`].
pub fn parse_conllu(text: &str) -> Result<Vec<Sentence>, ParseError> {
    let mut sentences = Vec::new();
    let mut current = Sentence::default();
    let mut open = false;

    for (idx, raw) in text.split('\n').enumerate() {
        let line_no = idx + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);

        if line.trim().is_empty() {
            if open {
                sentences.push(std::mem::take(&mut current));
                open = false;
            }
            continue;
        }
        open = true;

        if line.starts_with('#') {
            if current.tokens.is_empty() && current.nonstandard_lines.is_empty() {
                current.comments.push(line.to_owned());
            } else {
                current.nonstandard_lines.push(NonstandardLine {
                    position: current.tokens.len(),
                    line: line.to_owned(),
                });
            }
            continue;
        }

        let columns: Vec<&str> = line.split('\t').collect();
        if columns.len() != 10 {
            return Err(ParseError {
                line: line_no,
                kind: ParseErrorKind::ColumnCount(columns.len()),
            });
        }

        let id_field = columns[0];
        if id_field.contains('-') || id_field.contains('.') {
            if !is_range_or_decimal_id(id_field) {
                return Err(ParseError {
                    line: line_no,
                    kind: ParseErrorKind::InvalidId(id_field.to_owned()),
                });
            }
            current.nonstandard_lines.push(NonstandardLine {
                position: current.tokens.len(),
                line: line.to_owned(),
            });
            continue;
        }

        let id = parse_index(id_field)
            .filter(|&id| id >= 1)
            .ok_or_else(|| ParseError {
                line: line_no,
                kind: ParseErrorKind::InvalidId(id_field.to_owned()),
            })?;
        let head = parse_index(columns[6]).ok_or_else(|| ParseError {
            line: line_no,
            kind: ParseErrorKind::InvalidHead(columns[6].to_owned()),
        })?;

        current.tokens.push(Token {
            id,
            form: columns[1].to_owned(),
            lemma: columns[2].to_owned(),
            upos: columns[3].to_owned(),
            xpos: columns[4].to_owned(),
            feats: columns[5].to_owned(),
            head,
            deprel: columns[7].to_owned(),
            deps: columns[8].to_owned(),
            misc: columns[9].to_owned(),
        });
    }

    if open {
        sentences.push(current);
    }

    Ok(sentences)
}

fn parse_index(field: &str) -> Option<usize> {
    if field.is_empty() || !field.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    field.parse().ok()
}

fn is_range_or_decimal_id(field: &str) -> bool {
    let split = field.split_once('-').or_else(|| field.split_once('.'));
    matches!(split, Some((a, b)) if parse_index(a).is_some() && parse_index(b).is_some())
}

/// A single structural problem found by [`validate_sentence`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    Empty,
    NonContiguousIds {
        position: usize,
        expected: usize,
        found: usize,
    },
    HeadOutOfRange { id: usize, head: usize },
    NoRoot,
    MultipleRoots(Vec<usize>),
    /// Tokens whose head chain never reaches 0.
    Cycle(Vec<usize>),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Empty => write!(f, "empty sentence"),
            Violation::NonContiguousIds {
                position,
                expected,
                found,
            } => write!(
                f,
                "non-contiguous ids: token {} has id {}, expected {}",
                position + 1,
                found,
                expected
            ),
            Violation::HeadOutOfRange { id, head } => {
                write!(f, "head out of range: token {id} has head {head}")
            }
            Violation::NoRoot => write!(f, "no root"),
            Violation::MultipleRoots(ids) => write!(f, "multiple roots: {ids:?}"),
            Violation::Cycle(ids) => write!(f, "cycle: tokens {ids:?} never reach the root"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "valid");
        }
        let parts: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        write!(f, "{}", parts.join("; "))
    }
}

/// Checks id contiguity, head range, single root and acyclicity.
pub fn validate_sentence(sentence: &Sentence) -> ValidationReport {
    let mut violations = Vec::new();
    let tokens = &sentence.tokens;
    let n = tokens.len();

    if n == 0 {
        violations.push(Violation::Empty);
        return ValidationReport { violations };
    }

    let mut contiguous = true;
    for (position, token) in tokens.iter().enumerate() {
        if token.id != position + 1 {
            violations.push(Violation::NonContiguousIds {
                position,
                expected: position + 1,
                found: token.id,
            });
            contiguous = false;
            break;
        }
    }

    let mut heads_in_range = true;
    for token in tokens {
        if token.head > n {
            violations.push(Violation::HeadOutOfRange {
                id: token.id,
                head: token.head,
            });
            heads_in_range = false;
        }
    }

    let roots: Vec<usize> = tokens.iter().filter(|t| t.head == 0).map(|t| t.id).collect();
    match roots.len() {
        0 => violations.push(Violation::NoRoot),
        1 => {}
        _ => violations.push(Violation::MultipleRoots(roots)),
    }

    // Cycle detection needs positional head lookups to be meaningful.
    if contiguous && heads_in_range {
        let cyclic = tokens_off_root(tokens);
        if !cyclic.is_empty() {
            violations.push(Violation::Cycle(cyclic));
        }
    }

    ValidationReport { violations }
}

/// Ids whose head chain loops instead of reaching 0. Assumes contiguous ids
/// and in-range heads.
fn tokens_off_root(tokens: &[Token]) -> Vec<usize> {
    #[derive(Clone, Copy, PartialEq)]
    enum State {
        Unknown,
        Visiting,
        Rooted,
        Cyclic,
    }

    let n = tokens.len();
    let mut state = vec![State::Unknown; n + 1];
    state[0] = State::Rooted;

    for start in 1..=n {
        let mut path = Vec::new();
        let mut cur = start;
        while state[cur] == State::Unknown {
            state[cur] = State::Visiting;
            path.push(cur);
            cur = tokens[cur - 1].head;
        }
        let outcome = match state[cur] {
            State::Rooted => State::Rooted,
            _ => State::Cyclic,
        };
        for id in path {
            state[id] = outcome;
        }
    }

    (1..=n).filter(|&id| state[id] == State::Cyclic).collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("sentence {index} cannot be written: {report}")]
pub struct SerializeError {
    pub index: usize,
    pub report: ValidationReport,
}

/// Writes sentences as CoNLL-U with LF line endings. Refuses sentences that
/// fail validation.
pub fn serialize_conllu(sentences: &[Sentence]) -> Result<String, SerializeError> {
    let mut out = String::new();
    for (index, sentence) in sentences.iter().enumerate() {
        let report = validate_sentence(sentence);
        if !report.is_valid() {
            return Err(SerializeError { index, report });
        }
        write_sentence(sentence, &mut out);
    }
    Ok(out)
}

/// Appends one sentence block without validating it.
pub fn write_sentence(sentence: &Sentence, out: &mut String) {
    for comment in &sentence.comments {
        out.push_str(comment);
        out.push('\n');
    }
    let mut extra = sentence.nonstandard_lines.iter().peekable();
    for (i, token) in sentence.tokens.iter().enumerate() {
        while let Some(line) = extra.next_if(|l| l.position <= i) {
            out.push_str(&line.line);
            out.push('\n');
        }
        token.write_row(out);
    }
    for line in extra {
        out.push_str(&line.line);
        out.push('\n');
    }
    out.push('\n');
}
