use super::{ParseError, SourceSpan};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Tok {
    Ident,
    Int,
    LBrace,
    RBrace,
    LParen,
    RParen,
    Semi,
    Comma,
    Colon,
    Eq,
    Arrow,
    Slash,
    Minus,
    Eof,
}

impl Tok {
    pub(crate) fn describe(self) -> &'static str {
        match self {
            Tok::Ident => "identifier",
            Tok::Int => "integer",
            Tok::LBrace => "`{`",
            Tok::RBrace => "`}`",
            Tok::LParen => "`(`",
            Tok::RParen => "`)`",
            Tok::Semi => "`;`",
            Tok::Comma => "`,`",
            Tok::Colon => "`:`",
            Tok::Eq => "`=`",
            Tok::Arrow => "`->`",
            Tok::Slash => "`/`",
            Tok::Minus => "`-`",
            Tok::Eof => "end of input",
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Token {
    pub kind: Tok,
    pub text: String,
    pub span: SourceSpan,
}

/// Splits `text` into tokens; unknown characters become errors and are
/// skipped. The token list always ends with `Eof`.
pub(crate) fn lex(file: &str, text: &str, errors: &mut Vec<ParseError>) -> Vec<Token> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let span = |line, col, len| SourceSpan {
        file: file.to_string(),
        line,
        column: col,
        length: len,
    };
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
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        let kind = if c.is_ascii_alphabetic() {
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            Tok::Ident
        } else if c.is_ascii_digit() {
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            Tok::Int
        } else {
            i += 1;
            match c {
                '{' => Tok::LBrace,
                '}' => Tok::RBrace,
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                ';' => Tok::Semi,
                ',' => Tok::Comma,
                ':' => Tok::Colon,
                '=' => Tok::Eq,
                '/' => Tok::Slash,
                '-' if chars.get(i) == Some(&'>') => {
                    i += 1;
                    Tok::Arrow
                }
                '-' => Tok::Minus,
                other => {
                    errors.push(ParseError::new(span(line, col, 1), format!("unexpected character `{other}`")));
                    col += 1;
                    continue;
                }
            }
        };
        let len = i - start;
        out.push(Token {
            kind,
            text: chars[start..i].iter().collect(),
            span: span(line, col, len),
        });
        col += len;
    }
    out.push(Token {
        kind: Tok::Eof,
        text: String::new(),
        span: span(line, col, 0),
    });
    out
}
