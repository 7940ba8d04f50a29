//! Text format for substitution rules.
//!
//! ```text
//! field 4
//! lambda [2 0]
//! prototile L { vertices: [0 0] [2 0] [2 1] [1 1] [1 2] [0 2]; color: grey }
//! children L { (L, rot=0, refl=0, t=[0 0]) (L, rot=1, refl=0, t=[4 0]) }
//! ```
//!
//! A vector `[c0 c1 ...]` lists the coefficients of `1, z, z^2, ...` for the
//! primitive root `z` of the declared field.

use std::fmt::Write as _;

use super::builtin::builtin;
use super::cyclo::{ring_order, FieldCoord};
use super::rule::{ChildSpec, IsometrySpec, Prototile, SubstitutionRule};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Word(String),
    Punct(char),
}

fn tokenize(src: &str) -> Vec<(Tok, usize)> {
    let mut out = Vec::new();
    for (ln, line) in src.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("");
        let mut word = String::new();
        for ch in line.chars() {
            if "{}()[];:,=".contains(ch) || ch.is_whitespace() {
                if !word.is_empty() {
                    out.push((Tok::Word(std::mem::take(&mut word)), ln + 1));
                }
                if !ch.is_whitespace() {
                    out.push((Tok::Punct(ch), ln + 1));
                }
            } else {
                word.push(ch);
            }
        }
        if !word.is_empty() {
            out.push((Tok::Word(word), ln + 1));
        }
    }
    out
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    ring: Option<u8>,
}

impl Parser {
    fn line(&self) -> usize {
        self.toks
            .get(self.pos)
            .or_else(|| self.toks.last())
            .map(|t| t.1)
            .unwrap_or(1)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::Parse { line: self.line(), msg: msg.into() })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.0)
    }

    fn word(&mut self) -> Result<String> {
        match self.toks.get(self.pos) {
            Some((Tok::Word(w), _)) => {
                self.pos += 1;
                Ok(w.clone())
            }
            Some((Tok::Punct(c), _)) => self.err(format!("expected a word, found `{c}`")),
            None => self.err("unexpected end of file"),
        }
    }

    fn int(&mut self) -> Result<i64> {
        let w = self.word()?;
        match w.parse() {
            Ok(v) => Ok(v),
            Err(_) => {
                self.pos -= 1;
                self.err(format!("expected an integer, found `{w}`"))
            }
        }
    }

    fn punct(&mut self, c: char) -> Result<()> {
        match self.peek() {
            Some(Tok::Punct(p)) if *p == c => {
                self.pos += 1;
                Ok(())
            }
            Some(Tok::Word(w)) => self.err(format!("expected `{c}`, found `{w}`")),
            Some(Tok::Punct(p)) => self.err(format!("expected `{c}`, found `{p}`")),
            None => self.err(format!("expected `{c}`, found end of file")),
        }
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Punct(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<()> {
        let w = self.word()?;
        if w != kw {
            self.pos -= 1;
            return self.err(format!("expected `{kw}`, found `{w}`"));
        }
        Ok(())
    }

    fn vector(&mut self) -> Result<FieldCoord> {
        let Some(ring) = self.ring else {
            return self.err("`field` must be declared before any coordinate");
        };
        self.punct('[')?;
        let mut c = Vec::new();
        while !self.eat(']') {
            self.eat(',');
            if self.eat(']') {
                break;
            }
            c.push(self.int()?);
        }
        match FieldCoord::from_coeffs(ring, &c) {
            Ok(v) => Ok(v),
            Err(_) => self.err(format!("coordinate has {} coefficients, too many for the field", c.len())),
        }
    }
}

pub fn parse_rule(src: &str, name: &str) -> Result<SubstitutionRule> {
    let mut p = Parser { toks: tokenize(src), pos: 0, ring: None };
    let mut field = None;
    let mut lambda = None;
    let mut rule_name = name.to_string();
    let mut protos: Vec<(Prototile, usize)> = Vec::new();
    let mut raw_children: Vec<(String, usize, Vec<(String, usize, IsometrySpec)>)> = Vec::new();
    while p.peek().is_some() {
        let line = p.line();
        let kw = p.word()?;
        match kw.as_str() {
            "name" => rule_name = p.word()?,
            "field" => {
                let n = p.int()?;
                let Ok(n32) = u32::try_from(n) else {
                    return p.err(format!("field order {n} must be positive"));
                };
                let ring = ring_order(n32)?;
                field = Some(n32);
                p.ring = Some(ring);
            }
            "lambda" => lambda = Some(p.vector()?),
            "prototile" => {
                let id = p.word()?;
                p.punct('{')?;
                p.keyword("vertices")?;
                p.punct(':')?;
                let mut vertices = Vec::new();
                while p.peek() == Some(&Tok::Punct('[')) {
                    vertices.push(p.vector()?);
                }
                let mut color = None;
                while !p.eat('}') {
                    p.punct(';')?;
                    if p.eat('}') {
                        break;
                    }
                    p.keyword("color")?;
                    p.punct(':')?;
                    color = Some(p.word()?);
                }
                if vertices.len() < 3 {
                    return Err(Error::Parse { line, msg: format!("prototile `{id}` needs at least 3 vertices") });
                }
                if protos.iter().any(|(q, _)| q.id == id) {
                    return Err(Error::Parse { line, msg: format!("prototile `{id}` declared twice") });
                }
                protos.push((Prototile { id, vertices, color }, line));
            }
            "children" => {
                let id = p.word()?;
                p.punct('{')?;
                let mut kids = Vec::new();
                while !p.eat('}') {
                    let kline = p.line();
                    p.punct('(')?;
                    let cid = p.word()?;
                    let mut spec = IsometrySpec {
                        rotation_index: 0,
                        reflect: false,
                        translation: FieldCoord::zero(p.ring.unwrap_or(4)),
                    };
                    while p.eat(',') {
                        let key = p.word()?;
                        p.punct('=')?;
                        match key.as_str() {
                            "rot" => {
                                let k = p.int()?;
                                if k < 0 {
                                    return p.err("rotation index must be non-negative");
                                }
                                spec.rotation_index = k as u32;
                            }
                            "refl" => match p.int()? {
                                0 => spec.reflect = false,
                                1 => spec.reflect = true,
                                v => return p.err(format!("refl must be 0 or 1, found {v}")),
                            },
                            "t" => spec.translation = p.vector()?,
                            other => return p.err(format!("unknown placement key `{other}`")),
                        }
                    }
                    p.punct(')')?;
                    kids.push((cid, kline, spec));
                }
                raw_children.push((id, line, kids));
            }
            other => {
                p.pos -= 1;
                return p.err(format!("unknown directive `{other}`"));
            }
        }
    }
    let Some(field) = field else {
        return Err(Error::Parse { line: 1, msg: "missing `field` declaration".into() });
    };
    let Some(lambda) = lambda else {
        return Err(Error::Parse { line: 1, msg: "missing `lambda` declaration".into() });
    };
    if protos.is_empty() {
        return Err(Error::Parse { line: 1, msg: "no prototiles declared".into() });
    }
    let mut children: Vec<Option<Vec<ChildSpec>>> = vec![None; protos.len()];
    for (id, line, kids) in raw_children {
        let Some(i) = protos.iter().position(|(q, _)| q.id == id) else {
            return Err(Error::Parse { line, msg: format!("children block for unknown prototile `{id}`") });
        };
        if children[i].is_some() {
            return Err(Error::Parse { line, msg: format!("prototile `{id}` has two children blocks") });
        }
        let mut list = Vec::new();
        for (cid, kline, spec) in kids {
            let Some(j) = protos.iter().position(|(q, _)| q.id == cid) else {
                return Err(Error::Parse { line: kline, msg: format!("unknown child prototile `{cid}`") });
            };
            list.push(ChildSpec { prototile: j, placement: spec });
        }
        if list.is_empty() {
            return Err(Error::Parse { line, msg: format!("prototile `{id}` has an empty child list") });
        }
        children[i] = Some(list);
    }
    let mut out_children = Vec::new();
    for (i, c) in children.into_iter().enumerate() {
        match c {
            Some(c) => out_children.push(c),
            None => {
                let (q, line) = &protos[i];
                return Err(Error::Parse { line: *line, msg: format!("prototile `{}` has no children block", q.id) });
            }
        }
    }
    Ok(SubstitutionRule {
        name: rule_name,
        field,
        lambda,
        prototiles: protos.into_iter().map(|(q, _)| q).collect(),
        children: out_children,
    })
}

fn vec_str(z: &FieldCoord) -> String {
    let parts: Vec<String> = z.coeffs().iter().map(|c| c.to_string()).collect();
    format!("[{}]", parts.join(" "))
}

/// Serialize a rule in the text format accepted by [`parse_rule`].
pub fn to_rule_file(rule: &SubstitutionRule) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "name {}", rule.name.replace(|c: char| c.is_whitespace() || "{}()[];:,=#".contains(c), "_"));
    let _ = writeln!(s, "field {}", rule.field);
    let _ = writeln!(s, "lambda {}", vec_str(&rule.lambda));
    for p in &rule.prototiles {
        let verts: Vec<String> = p.vertices.iter().map(vec_str).collect();
        let _ = write!(s, "prototile {} {{ vertices: {}", p.id, verts.join(" "));
        if let Some(c) = &p.color {
            let _ = write!(s, "; color: {c}");
        }
        let _ = writeln!(s, " }}");
    }
    for (p, kids) in rule.prototiles.iter().zip(&rule.children) {
        let _ = writeln!(s, "children {} {{", p.id);
        for c in kids {
            let pl = &c.placement;
            let _ = writeln!(
                s,
                "  ({}, rot={}, refl={}, t={})",
                rule.prototiles[c.prototile].id,
                pl.rotation_index,
                pl.reflect as u8,
                vec_str(&pl.translation)
            );
        }
        let _ = writeln!(s, "}}");
    }
    s
}

/// Built-in name or path to a rule file.
pub fn load_rule(name_or_path: &str) -> Result<SubstitutionRule> {
    if let Some(r) = builtin(name_or_path)? {
        return Ok(r);
    }
    let path = std::path::Path::new(name_or_path);
    if !path.exists() {
        return Err(Error::UnknownRule(name_or_path.to_string()));
    }
    let src = std::fs::read_to_string(path)?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("rule");
    parse_rule(&src, stem)
}
