//! Line-oriented tokenizer for `.xcfg` text.

use super::diag::{DiagCode, Diagnostic, Span};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    /// `5x8`
    Dims(u64, u64),
    /// `0x12`: hex 18 where an integer is expected, `0x12` dims otherwise.
    HexOrDims(i64, u64),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Dot,
    Colon,
    Eq,
    Arrow,
    LArrow,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(v) => format!("integer {v}"),
            Tok::Dims(a, b) => format!("`{a}x{b}`"),
            Tok::HexOrDims(_, b) => format!("`0x{b}`"),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Dot => "`.`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Eq => "`=`".into(),
            Tok::Arrow => "`->`".into(),
            Tok::LArrow => "`<-`".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

/// Tokenize one line (without its terminator). `line_no` is 1-based.
pub fn lex_line(line: &str, line_no: usize) -> Result<Vec<Token>, Diagnostic> {
    let chars: Vec<char> = line.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let span = |a: usize, b: usize| Span::new(line_no, a + 1, b + 1);
    while i < chars.len() {
        let c = chars[i];
        let start = i;
        let single = match c {
            '#' => break,
            c if c.is_whitespace() => {
                i += 1;
                continue;
            }
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            '[' => Some(Tok::LBracket),
            ']' => Some(Tok::RBracket),
            ',' => Some(Tok::Comma),
            '.' => Some(Tok::Dot),
            ':' => Some(Tok::Colon),
            '=' => Some(Tok::Eq),
            _ => None,
        };
        if let Some(tok) = single {
            out.push(Token { tok, span: span(i, i + 1) });
            i += 1;
            continue;
        }
        if c == '-' && chars.get(i + 1) == Some(&'>') {
            out.push(Token { tok: Tok::Arrow, span: span(i, i + 2) });
            i += 2;
            continue;
        }
        if c == '<' && chars.get(i + 1) == Some(&'-') {
            out.push(Token { tok: Tok::LArrow, span: span(i, i + 2) });
            i += 2;
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Token { tok: Tok::Ident(chars[start..i].iter().collect()), span: span(start, i) });
            continue;
        }
        if c.is_ascii_digit() || (c == '-' && chars.get(i + 1).is_some_and(char::is_ascii_digit)) {
            let neg = c == '-';
            if neg {
                i += 1;
            }
            let digits_start = i;
            let hex = chars[i] == '0' && matches!(chars.get(i + 1), Some('x' | 'X'));
            if hex {
                i += 2;
                while i < chars.len() && chars[i].is_ascii_hexdigit() {
                    i += 1;
                }
            } else {
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            // dims literal `RxC`
            if !hex && !neg && chars.get(i) == Some(&'x') && chars.get(i + 1).is_some_and(char::is_ascii_digit) {
                let a: String = chars[digits_start..i].iter().collect();
                i += 1;
                let b_start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let b: String = chars[b_start..i].iter().collect();
                let sp = span(start, i);
                return match (a.parse::<u64>(), b.parse::<u64>()) {
                    (Ok(a), Ok(b)) => {
                        out.push(Token { tok: Tok::Dims(a, b), span: sp });
                        continue_lex(line, line_no, i, out)
                    }
                    _ => Err(Diagnostic::error(DiagCode::IntRange, Some(sp), "dimension literal out of range")),
                };
            }
            let text: String = chars[digits_start..i].iter().collect();
            let sp = span(start, i);
            if i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                return Err(Diagnostic::error(DiagCode::Lex, Some(span(start, i + 1)), "malformed number"));
            }
            let parsed = if hex {
                if text.len() == 2 {
                    return Err(Diagnostic::error(DiagCode::Lex, Some(sp), "hex literal without digits"));
                }
                i128::from_str_radix(&text[2..], 16)
            } else {
                text.parse::<i128>()
            };
            let value = parsed
                .ok()
                .map(|v| if neg { -v } else { v })
                .and_then(|v| i64::try_from(v).ok())
                .ok_or_else(|| Diagnostic::error(DiagCode::IntRange, Some(sp), "integer literal out of range"))?;
            let decimal_tail = if hex && !neg { text[2..].parse::<u64>().ok() } else { None };
            let tok = match decimal_tail {
                Some(d) if text[2..].bytes().all(|b| b.is_ascii_digit()) => Tok::HexOrDims(value, d),
                _ => Tok::Int(value),
            };
            out.push(Token { tok, span: sp });
            continue;
        }
        return Err(Diagnostic::error(DiagCode::Lex, Some(span(i, i + 1)), format!("unexpected character `{c}`")));
    }
    Ok(out)
}

// Restart the scan after a dims literal; keeps the main loop simple.
fn continue_lex(line: &str, line_no: usize, char_idx: usize, mut out: Vec<Token>) -> Result<Vec<Token>, Diagnostic> {
    let byte_idx = line.char_indices().nth(char_idx).map_or(line.len(), |(b, _)| b);
    let rest = lex_line(&line[byte_idx..], line_no)?;
    out.extend(rest.into_iter().map(|mut t| {
        t.span.col_start += char_idx;
        t.span.col_end += char_idx;
        t
    }));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<Tok> {
        lex_line(s, 1).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn header_tokens() {
        assert_eq!(
            toks("array 5x8 alu 2x8 ram # comment"),
            vec![
                Tok::Ident("array".into()),
                Tok::Dims(5, 8),
                Tok::Ident("alu".into()),
                Tok::Dims(2, 8),
                Tok::Ident("ram".into())
            ]
        );
    }

    #[test]
    fn numbers_and_arrows() {
        assert_eq!(toks("0x1f -5 -0x2 7"), vec![Tok::Int(31), Tok::Int(-5), Tok::Int(-2), Tok::Int(7)]);
        assert_eq!(toks("0x10"), vec![Tok::HexOrDims(16, 10)]);
        assert_eq!(
            toks("a.e0 -> b.w0 <- c"),
            vec![
                Tok::Ident("a".into()),
                Tok::Dot,
                Tok::Ident("e0".into()),
                Tok::Arrow,
                Tok::Ident("b".into()),
                Tok::Dot,
                Tok::Ident("w0".into()),
                Tok::LArrow,
                Tok::Ident("c".into())
            ]
        );
        assert_eq!(toks("l3=16:-4"), vec![Tok::Ident("l3".into()), Tok::Eq, Tok::Int(16), Tok::Colon, Tok::Int(-4)]);
    }

    #[test]
    fn spans_after_dims_are_shifted() {
        let t = lex_line("array 5x8 alu", 3).unwrap();
        assert_eq!(t[1].span, Span::new(3, 7, 10));
        assert_eq!(t[2].span, Span::new(3, 11, 14));
    }

    #[test]
    fn errors() {
        assert!(lex_line("pae $", 1).is_err());
        assert!(lex_line("12ab", 1).is_err());
        assert!(lex_line("0x", 1).is_err());
        let e = lex_line("99999999999999999999999", 2).unwrap_err();
        assert_eq!(e.code, DiagCode::IntRange);
        assert_eq!(e.span.unwrap().line, 2);
    }
}
