//! The text format consumed by the command-line tool: named measures and
//! one row of members with an optional scale.
//!
//! ```text
//! # comments and blank lines are ignored
//! measure coin: atoms=[-1, 1] weights=[0.5, 0.5]
//! row: members=[coin x 4] scale=1/sqrt(k)
//! ```
//!
//! Measures must be declared before the row that references them. A member
//! entry is a measure name, optionally followed by a repetition count
//! separated by `x`, `*`, or the multiplication sign. `scale` is a number
//! or the literal token `1/sqrt(k)`, which dilates every member by
//! 1/sqrt(k_n) for the total member count k_n (the normalized-sum
//! construction). Parsing is total: every rejection carries a line and
//! column.

use thiserror::Error;

use crate::conv::{ConvError, RowGroup, RowSpec};
use crate::measure::{AtomicMeasure, MeasureError};

#[derive(Debug, Error)]
#[error("line {line}, column {col}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

#[derive(Debug, Error)]
pub enum RowFileError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("measure '{name}': {source}")]
    BadMeasure {
        name: String,
        source: MeasureError,
    },
    #[error("row: {0}")]
    BadRow(#[from] ConvError),
    #[error("scale must be nonzero and finite")]
    BadScale,
}

/// Parsed file: syntax only, numeric validity checked by [`lower`].
#[derive(Debug, Clone, PartialEq)]
pub struct RowFile {
    pub measures: Vec<NamedMeasure>,
    pub row: Option<RowDecl>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedMeasure {
    pub name: String,
    pub atoms: Vec<f64>,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RowDecl {
    pub members: Vec<(String, u64)>,
    pub scale: ScaleExpr,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScaleExpr {
    Number(f64),
    /// The literal token `1/sqrt(k)`.
    InvSqrtK,
}

/// Parses a row file. Measure names referenced by the row must already be
/// declared, and at most one row is allowed.
pub fn parse(text: &str) -> Result<RowFile, ParseError> {
    let mut file = RowFile {
        measures: Vec::new(),
        row: None,
    };
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let content = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        };
        if content.trim().is_empty() {
            continue;
        }
        let mut sc = Scanner::new(content, line_no);
        sc.skip_ws();
        if sc.try_keyword("measure") {
            let m = parse_measure_line(&mut sc)?;
            if file.measures.iter().any(|e| e.name == m.name) {
                return Err(sc.error_at(1, format!("duplicate measure '{}'", m.name)));
            }
            file.measures.push(m);
        } else if sc.try_keyword("row") {
            if file.row.is_some() {
                return Err(sc.error_at(1, "more than one row declaration".into()));
            }
            file.row = Some(parse_row_line(&mut sc, &file.measures)?);
        } else {
            return Err(sc.error_here("expected 'measure' or 'row'".into()));
        }
    }
    Ok(file)
}

fn parse_measure_line(sc: &mut Scanner) -> Result<NamedMeasure, ParseError> {
    sc.skip_ws();
    let name = sc.ident()?;
    sc.skip_ws();
    sc.expect(':')?;
    sc.skip_ws();
    sc.keyword("atoms")?;
    sc.expect('=')?;
    let atoms = sc.number_list()?;
    sc.skip_ws();
    sc.keyword("weights")?;
    sc.expect('=')?;
    let weights = sc.number_list()?;
    sc.end_of_line()?;
    Ok(NamedMeasure {
        name,
        atoms,
        weights,
    })
}

fn parse_row_line(sc: &mut Scanner, known: &[NamedMeasure]) -> Result<RowDecl, ParseError> {
    sc.skip_ws();
    sc.expect(':')?;
    sc.skip_ws();
    sc.keyword("members")?;
    sc.expect('=')?;
    sc.skip_ws();
    sc.expect('[')?;
    let mut members = Vec::new();
    loop {
        sc.skip_ws();
        let col = sc.col();
        let name = sc.ident()?;
        if !known.iter().any(|m| m.name == name) {
            return Err(sc.error_at(col, format!("unknown measure '{name}'")));
        }
        sc.skip_ws();
        let count = if sc.try_any_char(&['x', '*', '\u{d7}']) {
            sc.skip_ws();
            sc.integer()?
        } else {
            1
        };
        if count == 0 {
            return Err(sc.error_at(col, "member count must be positive".into()));
        }
        members.push((name, count));
        sc.skip_ws();
        if sc.try_char(',') {
            continue;
        }
        sc.expect(']')?;
        break;
    }
    sc.skip_ws();
    let scale = if sc.try_keyword("scale") {
        sc.expect('=')?;
        sc.skip_ws();
        if sc.try_literal("1/sqrt(k)") {
            ScaleExpr::InvSqrtK
        } else {
            ScaleExpr::Number(sc.number()?)
        }
    } else {
        ScaleExpr::Number(1.0)
    };
    sc.end_of_line()?;
    Ok(RowDecl { members, scale })
}

/// Prints the canonical form; `parse(print_canonical(f)) == f`.
pub fn print_canonical(file: &RowFile) -> String {
    let mut out = String::new();
    for m in &file.measures {
        out.push_str(&format!(
            "measure {}: atoms=[{}] weights=[{}]\n",
            m.name,
            join_numbers(&m.atoms),
            join_numbers(&m.weights)
        ));
    }
    if let Some(row) = &file.row {
        let members: Vec<String> = row
            .members
            .iter()
            .map(|(name, count)| {
                if *count == 1 {
                    name.clone()
                } else {
                    format!("{name} x {count}")
                }
            })
            .collect();
        out.push_str(&format!("row: members=[{}]", members.join(", ")));
        match &row.scale {
            ScaleExpr::Number(v) if *v == 1.0 => {}
            ScaleExpr::Number(v) => out.push_str(&format!(" scale={v}")),
            ScaleExpr::InvSqrtK => out.push_str(" scale=1/sqrt(k)"),
        }
        out.push('\n');
    }
    out
}

fn join_numbers(vals: &[f64]) -> String {
    vals.iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

/// Validated measures and row from a parsed file.
#[derive(Debug)]
pub struct Lowered {
    pub measures: Vec<(String, AtomicMeasure)>,
    pub row: Option<RowSpec>,
}

/// Validates measures and builds the row, applying the scale. A row whose
/// members are all one measure goes through the common-base constructor so
/// huge multiplicities stay O(1).
pub fn lower(file: &RowFile) -> Result<Lowered, RowFileError> {
    let mut measures = Vec::with_capacity(file.measures.len());
    for m in &file.measures {
        let mu = AtomicMeasure::new(m.atoms.clone(), m.weights.clone()).map_err(|source| {
            RowFileError::BadMeasure {
                name: m.name.clone(),
                source,
            }
        })?;
        measures.push((m.name.clone(), mu));
    }
    let row = match &file.row {
        None => None,
        Some(decl) => {
            let k_n: u64 = decl.members.iter().map(|(_, c)| c).sum();
            let alpha = match decl.scale {
                ScaleExpr::Number(v) => v,
                ScaleExpr::InvSqrtK => 1.0 / (k_n as f64).sqrt(),
            };
            if !(alpha.is_finite()) || alpha == 0.0 {
                return Err(RowFileError::BadScale);
            }
            let lookup = |name: &str| -> &AtomicMeasure {
                &measures.iter().find(|(n, _)| n == name).expect("checked").1
            };
            let single_name = decl
                .members
                .iter()
                .all(|(n, _)| n == &decl.members[0].0);
            let spec = if single_name {
                RowSpec::scaled_copies("row", lookup(&decl.members[0].0), k_n, alpha)?
            } else {
                let mut groups = Vec::new();
                for (name, count) in &decl.members {
                    groups.push(RowGroup {
                        measure: lookup(name).dilate(alpha).map_err(ConvError::from)?,
                        count: *count,
                    });
                }
                RowSpec::from_groups("row", groups)?
            };
            Some(spec)
        }
    };
    Ok(Lowered { measures, row })
}

/// Character cursor over one line with 1-based column reporting.
struct Scanner {
    chars: Vec<char>,
    pos: usize,
    line: usize,
}

impl Scanner {
    fn new(s: &str, line: usize) -> Self {
        Self {
            chars: s.chars().collect(),
            pos: 0,
            line,
        }
    }

    fn col(&self) -> usize {
        self.pos + 1
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_whitespace()) {
            self.pos += 1;
        }
    }

    fn error_here(&self, message: String) -> ParseError {
        self.error_at(self.col(), message)
    }

    fn error_at(&self, col: usize, message: String) -> ParseError {
        ParseError {
            line: self.line,
            col,
            message,
        }
    }

    fn expect(&mut self, c: char) -> Result<(), ParseError> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error_here(format!("expected '{c}'")))
        }
    }

    fn try_char(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn try_any_char(&mut self, cs: &[char]) -> bool {
        cs.iter().any(|&c| self.try_char(c))
    }

    fn try_literal(&mut self, lit: &str) -> bool {
        let lit_chars: Vec<char> = lit.chars().collect();
        if self.chars[self.pos..].starts_with(&lit_chars) {
            self.pos += lit_chars.len();
            true
        } else {
            false
        }
    }

    /// Matches an identifier keyword exactly (not a prefix of a longer one).
    fn try_keyword(&mut self, kw: &str) -> bool {
        let save = self.pos;
        if self.try_literal(kw) {
            match self.peek() {
                Some(c) if c.is_alphanumeric() || c == '_' => {
                    self.pos = save;
                    false
                }
                _ => true,
            }
        } else {
            false
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        if self.try_keyword(kw) {
            Ok(())
        } else {
            Err(self.error_here(format!("expected '{kw}'")))
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match self.peek() {
            Some(c) if c.is_alphabetic() || c == '_' => {}
            _ => return Err(self.error_here("expected a name".into())),
        }
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_alphanumeric() || c == '_') {
            self.pos += 1;
        }
        Ok(self.chars[start..self.pos].iter().collect())
    }

    fn number(&mut self) -> Result<f64, ParseError> {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit() || "+-.eE".contains(c)) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.error_here("expected a number".into()));
        }
        let token: String = self.chars[start..self.pos].iter().collect();
        token
            .parse()
            .map_err(|_| self.error_at(start + 1, format!("invalid number '{token}'")))
    }

    fn integer(&mut self) -> Result<u64, ParseError> {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.error_here("expected a count".into()));
        }
        let token: String = self.chars[start..self.pos].iter().collect();
        token
            .parse()
            .map_err(|_| self.error_at(start + 1, format!("invalid count '{token}'")))
    }

    fn number_list(&mut self) -> Result<Vec<f64>, ParseError> {
        self.skip_ws();
        self.expect('[')?;
        let mut out = Vec::new();
        loop {
            self.skip_ws();
            out.push(self.number()?);
            self.skip_ws();
            if self.try_char(',') {
                continue;
            }
            self.expect(']')?;
            return Ok(out);
        }
    }

    fn end_of_line(&mut self) -> Result<(), ParseError> {
        self.skip_ws();
        match self.peek() {
            None => Ok(()),
            Some(c) => Err(self.error_here(format!("unexpected '{c}'"))),
        }
    }
}
