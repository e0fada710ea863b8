//! Diagnostics: source spans, severities, and the frozen rule catalog.
//!
//! Rule identifiers are stable strings; golden tests compare them verbatim.
//! The full catalog with one-line descriptions lives in `docs/grammar.md`.

use serde::Serialize;
use std::fmt;

/// A half-open byte range in the source text plus its 1-based line/column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct Span {
    #[serde(skip)]
    pub offset: usize,
    pub line: u32,
    pub col: u32,
    pub len: u32,
}

impl Span {
    pub fn new(offset: usize, len: u32, line: u32, col: u32) -> Self {
        Span {
            offset,
            len,
            line,
            col,
        }
    }

    /// Smallest span covering both `self` and `other`.
    pub fn merge(self, other: Span) -> Span {
        let (first, last) = if self.offset <= other.offset {
            (self, other)
        } else {
            (other, self)
        };
        Span {
            offset: first.offset,
            len: (last.offset + last.len as usize - first.offset) as u32,
            line: first.line,
            col: first.col,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

/// A structured diagnostic tied to a rule id from the catalog.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostic {
    pub rule_id: String,
    pub severity: Severity,
    pub span: Span,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fix_hint: Option<String>,
}

impl Diagnostic {
    pub fn error(rule_id: &str, span: Span, message: impl Into<String>) -> Self {
        Diagnostic {
            rule_id: rule_id.to_string(),
            severity: Severity::Error,
            span,
            message: message.into(),
            fix_hint: None,
        }
    }

    pub fn warning(rule_id: &str, span: Span, message: impl Into<String>) -> Self {
        Diagnostic {
            rule_id: rule_id.to_string(),
            severity: Severity::Warning,
            span,
            message: message.into(),
            fix_hint: None,
        }
    }

    pub fn with_hint(mut self, hint: impl Into<String>) -> Self {
        self.fix_hint = Some(hint.into());
        self
    }

    /// One diagnostic as a JSON-lines record.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("diagnostic serialization cannot fail")
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(
            f,
            "{}:{}: {} [{}] {}",
            self.span.line, self.span.col, sev, self.rule_id, self.message
        )
    }
}

/// Rule identifiers. Frozen: renaming any of these breaks golden tests.
pub mod rules {
    // Parsing.
    pub const PAR_LEX: &str = "PAR-LEX";
    pub const PAR_SYNTAX: &str = "PAR-SYNTAX";
    pub const PAR_DUP: &str = "PAR-DUP";

    // Name resolution.
    pub const SEM_UNDEF: &str = "SEM-UNDEF";
    pub const SEM_DUP: &str = "SEM-DUP";
    pub const SEM_KIND: &str = "SEM-KIND";
    pub const SEM_ARITY: &str = "SEM-ARITY";
    pub const SEM_SHAPE: &str = "SEM-SHAPE";

    // Staging discipline.
    pub const STG_G2L_PLACE: &str = "STG-G2L-PLACE";
    pub const STG_L2G_PLACE: &str = "STG-L2G-PLACE";
    pub const STG_COMPUTE_PLACE: &str = "STG-COMPUTE-PLACE";
    pub const STG_GM_IN_COMPUTE: &str = "STG-GM-IN-COMPUTE";
    pub const STG_USE_BEFORE_DEF: &str = "STG-USE-BEFORE-DEF";
    pub const STG_ROLE: &str = "STG-ROLE";

    // Buffer capacity and bounds.
    pub const BUF_UB_OVERFLOW: &str = "BUF-UB-OVERFLOW";
    pub const BUF_L1_OVERFLOW: &str = "BUF-L1-OVERFLOW";
    pub const BUF_SLICE_OOB: &str = "BUF-SLICE-OOB";

    // Tiling.
    pub const TIL_NONPOS: &str = "TIL-NONPOS";
    pub const TIL_GAP: &str = "TIL-GAP";
    pub const TIL_OVERLAP: &str = "TIL-OVERLAP";
    pub const TIL_BLOCKS_OVER_CORES: &str = "TIL-BLOCKS-OVER-CORES";

    // Target IR structure.
    pub const TGT_STAGE_MIX: &str = "TGT-STAGE-MIX";
    pub const TGT_DEQ_FIRST: &str = "TGT-DEQ-FIRST";
    pub const TGT_QUEUE_IMBALANCE: &str = "TGT-QUEUE-IMBALANCE";
    pub const TGT_GM_IN_COMPUTE: &str = "TGT-GM-IN-COMPUTE";
    pub const TGT_BARRIER_PLACE: &str = "TGT-BARRIER-PLACE";
    /// Pass-4 gate: plain transfers must all be aligned after the rewrite.
    pub const TGT_ALIGN: &str = "TGT-ALIGN";
}

/// True if any diagnostic in the slice is an error.
pub fn has_errors(diags: &[Diagnostic]) -> bool {
    diags.iter().any(|d| d.severity == Severity::Error)
}
