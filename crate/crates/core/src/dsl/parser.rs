use num_bigint::BigInt;

use super::lexer::{Tok, Token};
use super::{ParseError, SourceSpan};
use crate::graph::NodeKind;
use crate::scalar::Rational;

#[derive(Clone, Debug)]
pub(crate) struct Name {
    pub text: String,
    pub span: SourceSpan,
}

#[derive(Debug)]
pub(crate) struct NodeDecl {
    pub name: Name,
    pub kind: NodeKind,
}

#[derive(Debug)]
pub(crate) struct EdgeDecl {
    pub from: Name,
    pub to: Name,
    pub span: SourceSpan,
}

#[derive(Debug)]
pub(crate) struct Row {
    pub assigns: Vec<(Name, Name)>,
    pub exo: Name,
    pub out: Name,
    pub span: SourceSpan,
}

#[derive(Debug)]
pub(crate) enum ScimDecl {
    Domain { node: Name, values: Vec<Name> },
    Exo { node: Name, entries: Vec<(Name, Rational)> },
    Fn { node: Name, rows: Vec<Row> },
    Value { node: Name, entries: Vec<(Name, Rational)> },
}

#[derive(Debug)]
pub(crate) struct Ast {
    pub name: Option<Name>,
    pub nodes: Vec<NodeDecl>,
    pub edges: Vec<EdgeDecl>,
    /// Span of the `scim` keyword and its declarations.
    pub scim: Option<(SourceSpan, Vec<(ScimDecl, SourceSpan)>)>,
}

/// Marker for a statement that failed; the error is already recorded.
struct Bail;

type P<T> = Result<T, Bail>;

pub(crate) struct Parser<'a> {
    toks: &'a [Token],
    pos: usize,
    pub errors: Vec<ParseError>,
}

impl<'a> Parser<'a> {
    pub fn new(toks: &'a [Token]) -> Self {
        Parser {
            toks,
            pos: 0,
            errors: Vec::new(),
        }
    }

    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if t.kind != Tok::Eof {
            self.pos += 1;
        }
        t
    }

    fn at(&self, kind: Tok) -> bool {
        self.peek().kind == kind
    }

    fn at_word(&self, word: &str) -> bool {
        self.at(Tok::Ident) && self.peek().text == word
    }

    fn fail<T>(&mut self, expected: &[&str]) -> P<T> {
        let t = self.peek().clone();
        let found = if t.kind == Tok::Eof { "end of input".to_string() } else { format!("`{}`", t.text) };
        let mut e = ParseError::new(t.span, format!("unexpected {found}"));
        e.expected = expected.iter().map(|s| s.to_string()).collect();
        self.errors.push(e);
        Err(Bail)
    }

    fn expect(&mut self, kind: Tok) -> P<Token> {
        if self.at(kind) {
            Ok(self.bump())
        } else {
            self.fail(&[kind.describe()])
        }
    }

    fn expect_word(&mut self, word: &str) -> P<Token> {
        if self.at_word(word) {
            Ok(self.bump())
        } else {
            self.fail(&[&format!("`{word}`")])
        }
    }

    fn name(&mut self) -> P<Name> {
        let t = self.expect(Tok::Ident)?;
        Ok(Name {
            text: t.text,
            span: t.span,
        })
    }

    /// Skips past the next `;` at this nesting level, stopping before a
    /// closing brace.
    fn recover(&mut self) {
        let mut depth = 0usize;
        loop {
            match self.peek().kind {
                Tok::Eof => return,
                Tok::Semi if depth == 0 => {
                    self.bump();
                    return;
                }
                Tok::LBrace => depth += 1,
                Tok::RBrace if depth == 0 => return,
                Tok::RBrace => depth -= 1,
                _ => {}
            }
            self.bump();
        }
    }

    fn span_from(&self, start: &SourceSpan) -> SourceSpan {
        let end = &self.toks[self.pos.saturating_sub(1)].span;
        let length = if end.line == start.line {
            end.column + end.length - start.column
        } else {
            start.length
        };
        SourceSpan {
            length,
            ..start.clone()
        }
    }

    pub fn model(&mut self) -> Ast {
        let mut ast = Ast {
            name: None,
            nodes: Vec::new(),
            edges: Vec::new(),
            scim: None,
        };
        if self.cid_block(&mut ast).is_err() {
            return ast;
        }
        if self.at_word("scim") {
            let _ = self.scim_block(&mut ast);
        }
        if !self.at(Tok::Eof) {
            let _ = self.fail::<()>(&[if ast.scim.is_some() { "end of input" } else { "`scim`" }]);
        }
        ast
    }

    fn cid_block(&mut self, ast: &mut Ast) -> P<()> {
        self.expect_word("cid")?;
        ast.name = Some(self.name()?);
        self.expect(Tok::LBrace)?;
        loop {
            if self.at(Tok::RBrace) {
                self.bump();
                return Ok(());
            }
            if self.at(Tok::Eof) {
                return self.fail(&["`}`"]);
            }
            if self.cid_stmt(ast).is_err() {
                self.recover();
            }
        }
    }

    fn cid_stmt(&mut self, ast: &mut Ast) -> P<()> {
        let kind = match self.peek().text.as_str() {
            _ if !self.at(Tok::Ident) => None,
            "chance" => Some(NodeKind::Chance),
            "decision" => Some(NodeKind::Decision),
            "utility" => Some(NodeKind::Utility),
            "edge" => {
                self.bump();
                loop {
                    let from = self.name()?;
                    self.expect(Tok::Arrow)?;
                    let to = self.name()?;
                    let span = self.span_from(&from.span);
                    ast.edges.push(EdgeDecl { from, to, span });
                    if self.at(Tok::Comma) {
                        self.bump();
                    } else {
                        break;
                    }
                }
                self.expect(Tok::Semi)?;
                return Ok(());
            }
            _ => None,
        };
        let Some(kind) = kind else {
            return self.fail(&["`chance`", "`decision`", "`utility`", "`edge`", "`}`"]);
        };
        self.bump();
        loop {
            let name = self.name()?;
            ast.nodes.push(NodeDecl { name, kind });
            if self.at(Tok::Comma) {
                self.bump();
            } else {
                break;
            }
        }
        self.expect(Tok::Semi)?;
        Ok(())
    }

    fn scim_block(&mut self, ast: &mut Ast) -> P<()> {
        let kw = self.bump();
        let mut decls = Vec::new();
        let res = (|| {
            self.expect(Tok::LBrace)?;
            loop {
                if self.at(Tok::RBrace) {
                    self.bump();
                    return Ok(());
                }
                if self.at(Tok::Eof) {
                    return self.fail(&["`}`"]);
                }
                let start = self.peek().span.clone();
                match self.scim_stmt() {
                    Ok(d) => decls.push((d, self.span_from(&start))),
                    Err(Bail) => self.recover(),
                }
            }
        })();
        ast.scim = Some((kw.span, decls));
        res
    }

    fn scim_stmt(&mut self) -> P<ScimDecl> {
        let word = if self.at(Tok::Ident) { self.peek().text.clone() } else { String::new() };
        match word.as_str() {
            "domain" => {
                self.bump();
                let node = self.name()?;
                self.expect(Tok::Eq)?;
                self.expect(Tok::LBrace)?;
                let mut values = vec![self.name()?];
                while self.at(Tok::Comma) {
                    self.bump();
                    values.push(self.name()?);
                }
                self.expect(Tok::RBrace)?;
                self.expect(Tok::Semi)?;
                Ok(ScimDecl::Domain { node, values })
            }
            "exo" => {
                self.bump();
                let node = self.name()?;
                self.expect(Tok::Eq)?;
                let entries = self.weighted_list()?;
                Ok(ScimDecl::Exo { node, entries })
            }
            "value" => {
                self.bump();
                let node = self.name()?;
                let entries = self.weighted_list()?;
                Ok(ScimDecl::Value { node, entries })
            }
            "fn" => {
                self.bump();
                let node = self.name()?;
                self.expect(Tok::Colon)?;
                let mut rows = Vec::new();
                if !self.at(Tok::LParen) {
                    return self.fail(&["`(`"]);
                }
                while self.at(Tok::LParen) {
                    match self.row() {
                        Ok(r) => rows.push(r),
                        Err(Bail) => self.recover(),
                    }
                }
                Ok(ScimDecl::Fn { node, rows })
            }
            _ => self.fail(&["`domain`", "`exo`", "`fn`", "`value`", "`}`"]),
        }
    }

    /// `{ name : rational, ... } ;`
    fn weighted_list(&mut self) -> P<Vec<(Name, Rational)>> {
        self.expect(Tok::LBrace)?;
        let mut out = Vec::new();
        loop {
            let n = self.name()?;
            self.expect(Tok::Colon)?;
            let r = self.rational()?;
            out.push((n, r));
            if self.at(Tok::Comma) {
                self.bump();
            } else {
                break;
            }
        }
        self.expect(Tok::RBrace)?;
        self.expect(Tok::Semi)?;
        Ok(out)
    }

    fn rational(&mut self) -> P<Rational> {
        let neg = if self.at(Tok::Minus) {
            self.bump();
            true
        } else {
            false
        };
        let n = self.expect(Tok::Int)?;
        let mut numer: BigInt = n.text.parse().expect("digits");
        if neg {
            numer = -numer;
        }
        if self.at(Tok::Slash) {
            self.bump();
            let d = self.expect(Tok::Int)?;
            let denom: BigInt = d.text.parse().expect("digits");
            if denom == BigInt::from(0) {
                self.errors.push(ParseError::new(d.span, "zero denominator".to_string()));
                return Err(Bail);
            }
            return Ok(Rational::new(numer, denom));
        }
        Ok(Rational::from_integer(numer))
    }

    /// `( P = v , ... , exo = e ) -> out ;`
    fn row(&mut self) -> P<Row> {
        let open = self.expect(Tok::LParen)?;
        let mut pairs = Vec::new();
        if self.at(Tok::Comma) {
            self.bump();
        }
        loop {
            let k = self.name()?;
            self.expect(Tok::Eq)?;
            let v = self.name()?;
            pairs.push((k, v));
            if self.at(Tok::Comma) {
                self.bump();
            } else {
                break;
            }
        }
        self.expect(Tok::RParen)?;
        self.expect(Tok::Arrow)?;
        let out = self.name()?;
        self.expect(Tok::Semi)?;
        let span = self.span_from(&open.span);
        let (last, _) = pairs.last().expect("nonempty");
        if last.text != "exo" {
            self.errors.push(ParseError::new(span, "row must end with `exo = <value>`".to_string()));
            return Err(Bail);
        }
        let (_, exo) = pairs.pop().expect("nonempty");
        Ok(Row {
            assigns: pairs,
            exo,
            out,
            span,
        })
    }
}
