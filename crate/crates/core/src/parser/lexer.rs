use num::{BigInt, BigRational};

use super::span::{Pos, SourceSpan};
use super::ParseError;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    /// Identifier with its trailing primes.
    Ident(String, u32),
    Int(u64),
    Decimal(BigRational),
    /// A prime not attached to an identifier, e.g. after `)`.
    Prime,
    Sym(&'static str),
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(name, p) => format!("`{}{}`", name, "'".repeat(*p as usize)),
            Tok::Int(n) => format!("`{n}`"),
            Tok::Decimal(q) => format!("number `{q}`"),
            Tok::Prime => "`'`".into(),
            Tok::Sym(s) => format!("`{s}`"),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Token {
    pub tok: Tok,
    pub span: SourceSpan,
}

const SYMBOLS: [&str; 22] =
    ["&&", "||", "<=", ">=", "==", "!=", "+=", "(", ")", "{", "}", "[", "]", ",", "+", "-", "*", "/", "^", "<", ">", "="];

pub(crate) fn tokenize(file: &str, text: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1u32, 1u32);
    let pos = |line, col| Pos { line, col };
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let start = pos(line, col);
        let begin = i;
        let tok = if c.is_ascii_alphabetic() || c == '_' {
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let name: String = chars[begin..i].iter().collect();
            let mut primes = 0;
            while i < chars.len() && chars[i] == '\'' {
                primes += 1;
                i += 1;
            }
            Tok::Ident(name, primes)
        } else if c.is_ascii_digit() {
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let whole: String = chars[begin..i].iter().collect();
            if i + 1 < chars.len() && chars[i] == '.' && chars[i + 1].is_ascii_digit() {
                i += 1;
                let frac_start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let frac: String = chars[frac_start..i].iter().collect();
                let numer: BigInt = format!("{whole}{frac}").parse().expect("digits");
                let denom = num::pow(BigInt::from(10), frac.len());
                Tok::Decimal(BigRational::new(numer, denom))
            } else {
                match whole.parse::<u64>() {
                    Ok(n) => Tok::Int(n),
                    Err(_) => {
                        return Err(ParseError::new(
                            SourceSpan::new(file, start, pos(line, col + (i - begin) as u32)),
                            "integer literal too large",
                        ))
                    }
                }
            }
        } else if c == '\'' {
            i += 1;
            Tok::Prime
        } else if let Some(sym) = SYMBOLS.iter().find(|s| {
            let sc: Vec<char> = s.chars().collect();
            chars[i..].starts_with(&sc)
        }) {
            i += sym.len();
            Tok::Sym(sym)
        } else if c == ':' {
            i += 1;
            Tok::Sym(":")
        } else {
            return Err(ParseError::new(SourceSpan::new(file, start, pos(line, col + 1)), format!("unexpected character `{c}`")));
        };
        col += (i - begin) as u32;
        tokens.push(Token { tok, span: SourceSpan::new(file, start, pos(line, col)) });
    }
    let end = pos(line, col);
    tokens.push(Token { tok: Tok::Eof, span: SourceSpan::new(file, end, end) });
    Ok(tokens)
}
