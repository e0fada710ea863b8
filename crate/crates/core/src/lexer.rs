//! Hand-written lexer for `.adsl` source text.
//!
//! Never panics: unknown characters produce `PAR-LEX` diagnostics and are
//! skipped, so downstream always sees a well-formed token stream.

use crate::diag::{rules, Diagnostic, Span};

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    Float(f64),
    Str(String),

    KwHost,
    KwKernel,
    KwTiling,
    KwLaunch,
    KwOver,
    KwOut,
    KwAllocUb,
    KwAllocL1,
    KwCopyin,
    KwCompute,
    KwCopyout,
    KwFor,
    KwIn,
    KwLet,
    KwSync,

    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Lt,
    Gt,
    Comma,
    Colon,
    Semi,
    At,
    DotDot,
    Plus,
    Minus,
    Star,
    Slash,
    Percent,
    Eq,

    Eof,
}

impl Tok {
    /// Human-readable token description for error messages.
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Int(v) => format!("integer `{v}`"),
            Tok::Float(v) => format!("float `{v}`"),
            Tok::Str(_) => "string literal".to_string(),
            Tok::KwHost => "`host`".to_string(),
            Tok::KwKernel => "`kernel`".to_string(),
            Tok::KwTiling => "`tiling`".to_string(),
            Tok::KwLaunch => "`launch`".to_string(),
            Tok::KwOver => "`over`".to_string(),
            Tok::KwOut => "`out`".to_string(),
            Tok::KwAllocUb => "`alloc_ub`".to_string(),
            Tok::KwAllocL1 => "`alloc_l1`".to_string(),
            Tok::KwCopyin => "`copyin`".to_string(),
            Tok::KwCompute => "`compute`".to_string(),
            Tok::KwCopyout => "`copyout`".to_string(),
            Tok::KwFor => "`for`".to_string(),
            Tok::KwIn => "`in`".to_string(),
            Tok::KwLet => "`let`".to_string(),
            Tok::KwSync => "`sync`".to_string(),
            Tok::LParen => "`(`".to_string(),
            Tok::RParen => "`)`".to_string(),
            Tok::LBrace => "`{`".to_string(),
            Tok::RBrace => "`}`".to_string(),
            Tok::LBracket => "`[`".to_string(),
            Tok::RBracket => "`]`".to_string(),
            Tok::Lt => "`<`".to_string(),
            Tok::Gt => "`>`".to_string(),
            Tok::Comma => "`,`".to_string(),
            Tok::Colon => "`:`".to_string(),
            Tok::Semi => "`;`".to_string(),
            Tok::At => "`@`".to_string(),
            Tok::DotDot => "`..`".to_string(),
            Tok::Plus => "`+`".to_string(),
            Tok::Minus => "`-`".to_string(),
            Tok::Star => "`*`".to_string(),
            Tok::Slash => "`/`".to_string(),
            Tok::Percent => "`%`".to_string(),
            Tok::Eq => "`=`".to_string(),
            Tok::Eof => "end of input".to_string(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

pub struct LexResult {
    pub tokens: Vec<Token>,
    pub diagnostics: Vec<Diagnostic>,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
    line: u32,
    col: u32,
}

pub fn lex(source: &str) -> LexResult {
    let mut lx = Lexer {
        src: source.as_bytes(),
        pos: 0,
        line: 1,
        col: 1,
    };
    let mut tokens = Vec::new();
    let mut diagnostics = Vec::new();

    loop {
        lx.skip_trivia();
        if lx.pos >= lx.src.len() {
            tokens.push(Token {
                tok: Tok::Eof,
                span: lx.span_here(0),
            });
            break;
        }
        let start = (lx.pos, lx.line, lx.col);
        let c = lx.src[lx.pos];
        match c {
            b'(' => lx.punct(&mut tokens, Tok::LParen),
            b')' => lx.punct(&mut tokens, Tok::RParen),
            b'{' => lx.punct(&mut tokens, Tok::LBrace),
            b'}' => lx.punct(&mut tokens, Tok::RBrace),
            b'[' => lx.punct(&mut tokens, Tok::LBracket),
            b']' => lx.punct(&mut tokens, Tok::RBracket),
            b'<' => lx.punct(&mut tokens, Tok::Lt),
            b'>' => lx.punct(&mut tokens, Tok::Gt),
            b',' => lx.punct(&mut tokens, Tok::Comma),
            b':' => lx.punct(&mut tokens, Tok::Colon),
            b';' => lx.punct(&mut tokens, Tok::Semi),
            b'@' => lx.punct(&mut tokens, Tok::At),
            b'+' => lx.punct(&mut tokens, Tok::Plus),
            b'-' => lx.punct(&mut tokens, Tok::Minus),
            b'*' => lx.punct(&mut tokens, Tok::Star),
            b'/' => lx.punct(&mut tokens, Tok::Slash),
            b'%' => lx.punct(&mut tokens, Tok::Percent),
            b'=' => lx.punct(&mut tokens, Tok::Eq),
            b'.' => {
                if lx.peek(1) == Some(b'.') {
                    lx.advance();
                    lx.advance();
                    tokens.push(Token {
                        tok: Tok::DotDot,
                        span: lx.span_from(start, 2),
                    });
                } else {
                    lx.advance();
                    diagnostics.push(Diagnostic::error(
                        rules::PAR_LEX,
                        lx.span_from(start, 1),
                        "stray `.`; ranges are written `0..n`",
                    ));
                }
            }
            b'"' => match lx.string() {
                Ok((s, len)) => tokens.push(Token {
                    tok: Tok::Str(s),
                    span: lx.span_from(start, len),
                }),
                Err(d) => diagnostics.push(d),
            },
            b'0'..=b'9' => match lx.number() {
                Ok((tok, len)) => tokens.push(Token {
                    tok,
                    span: lx.span_from(start, len),
                }),
                Err(d) => diagnostics.push(d),
            },
            c if c == b'_' || c.is_ascii_alphabetic() => {
                let (tok, len) = lx.ident_or_keyword();
                tokens.push(Token {
                    tok,
                    span: lx.span_from(start, len),
                });
            }
            other => {
                lx.advance();
                diagnostics.push(Diagnostic::error(
                    rules::PAR_LEX,
                    lx.span_from(start, 1),
                    format!("unexpected character `{}`", other as char),
                ));
            }
        }
    }

    LexResult {
        tokens,
        diagnostics,
    }
}

impl<'a> Lexer<'a> {
    fn peek(&self, ahead: usize) -> Option<u8> {
        self.src.get(self.pos + ahead).copied()
    }

    fn advance(&mut self) {
        if self.pos < self.src.len() {
            if self.src[self.pos] == b'\n' {
                self.line += 1;
                self.col = 1;
            } else {
                self.col += 1;
            }
            self.pos += 1;
        }
    }

    fn span_here(&self, len: u32) -> Span {
        Span::new(self.pos, len, self.line, self.col)
    }

    fn span_from(&self, start: (usize, u32, u32), len: usize) -> Span {
        Span::new(start.0, len as u32, start.1, start.2)
    }

    fn skip_trivia(&mut self) {
        loop {
            match self.peek(0) {
                Some(c) if c.is_ascii_whitespace() => self.advance(),
                Some(b'/') if self.peek(1) == Some(b'/') => {
                    while let Some(c) = self.peek(0) {
                        if c == b'\n' {
                            break;
                        }
                        self.advance();
                    }
                }
                _ => break,
            }
        }
    }

    fn punct(&mut self, tokens: &mut Vec<Token>, tok: Tok) {
        let span = self.span_here(1);
        self.advance();
        tokens.push(Token { tok, span });
    }

    fn string(&mut self) -> Result<(String, usize), Diagnostic> {
        let start = (self.pos, self.line, self.col);
        self.advance(); // opening quote
        let mut out = String::new();
        loop {
            match self.peek(0) {
                None | Some(b'\n') => {
                    return Err(Diagnostic::error(
                        rules::PAR_LEX,
                        self.span_from(start, self.pos - start.0),
                        "unterminated string literal",
                    ));
                }
                Some(b'"') => {
                    self.advance();
                    return Ok((out, self.pos - start.0));
                }
                Some(b'\\') => {
                    self.advance();
                    match self.peek(0) {
                        Some(b'"') => {
                            out.push('"');
                            self.advance();
                        }
                        Some(b'\\') => {
                            out.push('\\');
                            self.advance();
                        }
                        _ => {
                            return Err(Diagnostic::error(
                                rules::PAR_LEX,
                                self.span_from(start, self.pos - start.0),
                                "unsupported escape; only \\\" and \\\\ are allowed",
                            ));
                        }
                    }
                }
                Some(_) => {
                    // Multi-byte UTF-8 sequences pass through byte-wise.
                    let b = self.src[self.pos];
                    self.advance();
                    if b < 0x80 {
                        out.push(b as char);
                    } else {
                        let mut seq = vec![b];
                        while let Some(nb) = self.peek(0) {
                            if nb & 0xC0 == 0x80 {
                                seq.push(nb);
                                self.advance();
                            } else {
                                break;
                            }
                        }
                        out.push_str(std::str::from_utf8(&seq).unwrap_or("\u{FFFD}"));
                    }
                }
            }
        }
    }

    fn number(&mut self) -> Result<(Tok, usize), Diagnostic> {
        let start = (self.pos, self.line, self.col);
        while matches!(self.peek(0), Some(c) if c.is_ascii_digit()) {
            self.advance();
        }
        let mut is_float = false;
        if self.peek(0) == Some(b'.') && matches!(self.peek(1), Some(c) if c.is_ascii_digit()) {
            is_float = true;
            self.advance();
            while matches!(self.peek(0), Some(c) if c.is_ascii_digit()) {
                self.advance();
            }
        }
        if matches!(self.peek(0), Some(b'e') | Some(b'E')) {
            let mut ahead = 1;
            if matches!(self.peek(1), Some(b'+') | Some(b'-')) {
                ahead = 2;
            }
            if matches!(self.peek(ahead), Some(c) if c.is_ascii_digit()) {
                is_float = true;
                for _ in 0..ahead {
                    self.advance();
                }
                while matches!(self.peek(0), Some(c) if c.is_ascii_digit()) {
                    self.advance();
                }
            }
        }
        let len = self.pos - start.0;
        let text = std::str::from_utf8(&self.src[start.0..self.pos]).unwrap();
        if is_float {
            match text.parse::<f64>() {
                Ok(v) => Ok((Tok::Float(v), len)),
                Err(_) => Err(Diagnostic::error(
                    rules::PAR_LEX,
                    self.span_from(start, len),
                    format!("malformed float literal `{text}`"),
                )),
            }
        } else {
            match text.parse::<i64>() {
                Ok(v) => Ok((Tok::Int(v), len)),
                Err(_) => Err(Diagnostic::error(
                    rules::PAR_LEX,
                    self.span_from(start, len),
                    format!("integer literal `{text}` out of range"),
                )),
            }
        }
    }

    fn ident_or_keyword(&mut self) -> (Tok, usize) {
        let start = self.pos;
        while matches!(self.peek(0), Some(c) if c == b'_' || c.is_ascii_alphanumeric()) {
            self.advance();
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        let tok = match text {
            "host" => Tok::KwHost,
            "kernel" => Tok::KwKernel,
            "tiling" => Tok::KwTiling,
            "launch" => Tok::KwLaunch,
            "over" => Tok::KwOver,
            "out" => Tok::KwOut,
            "alloc_ub" => Tok::KwAllocUb,
            "alloc_l1" => Tok::KwAllocL1,
            "copyin" => Tok::KwCopyin,
            "compute" => Tok::KwCompute,
            "copyout" => Tok::KwCopyout,
            "for" => Tok::KwFor,
            "in" => Tok::KwIn,
            "let" => Tok::KwLet,
            "sync" => Tok::KwSync,
            _ => Tok::Ident(text.to_string()),
        };
        (tok, self.pos - start)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<Tok> {
        lex(src).tokens.into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn lexes_minimal_program_tokens() {
        let toks = kinds("host h(x:[64]f32){launch k<1>(x)} kernel k(x){ }");
        assert_eq!(toks[0], Tok::KwHost);
        assert!(toks.contains(&Tok::Int(64)));
        assert!(toks.contains(&Tok::Ident("f32".into())));
        assert_eq!(*toks.last().unwrap(), Tok::Eof);
    }

    #[test]
    fn range_vs_float() {
        assert_eq!(
            kinds("0..5"),
            vec![Tok::Int(0), Tok::DotDot, Tok::Int(5), Tok::Eof]
        );
        assert_eq!(kinds("0.5"), vec![Tok::Float(0.5), Tok::Eof]);
        assert_eq!(kinds("1e-3"), vec![Tok::Float(1e-3), Tok::Eof]);
    }

    #[test]
    fn comments_skipped() {
        assert_eq!(
            kinds("let x // trailing\n = 3"),
            vec![Tok::KwLet, Tok::Ident("x".into()), Tok::Eq, Tok::Int(3), Tok::Eof]
        );
    }

    #[test]
    fn bad_char_reported_and_skipped() {
        let r = lex("let $ x");
        assert_eq!(r.diagnostics.len(), 1);
        assert_eq!(r.diagnostics[0].rule_id, "PAR-LEX");
        assert_eq!(r.tokens.len(), 3); // let, x, eof
    }

    #[test]
    fn string_escapes() {
        let r = lex(r#""with \"quote\" and \\ back""#);
        assert_eq!(
            r.tokens[0].tok,
            Tok::Str("with \"quote\" and \\ back".into())
        );
    }

    #[test]
    fn spans_track_lines() {
        let r = lex("host\n  kernel");
        assert_eq!(r.tokens[0].span.line, 1);
        assert_eq!(r.tokens[1].span.line, 2);
        assert_eq!(r.tokens[1].span.col, 3);
    }
}
