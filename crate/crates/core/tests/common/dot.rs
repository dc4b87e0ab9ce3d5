//! Recursive-descent checker for the DOT subset the exporter emits.

use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Id(String),
    Str(String),
    Punct(&'static str),
}

fn tokenize(text: &str) -> Result<Vec<Tok>, String> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c == '"' {
            let mut s = String::new();
            i += 1;
            loop {
                match chars.get(i) {
                    None => return Err("unterminated string".into()),
                    Some('"') => break,
                    Some('\\') => {
                        let next = chars.get(i + 1).ok_or("dangling escape")?;
                        s.push('\\');
                        s.push(*next);
                        i += 2;
                    }
                    Some(&ch) => {
                        s.push(ch);
                        i += 1;
                    }
                }
            }
            i += 1;
            out.push(Tok::Str(s));
        } else if c == '-' && chars.get(i + 1) == Some(&'>') {
            out.push(Tok::Punct("->"));
            i += 2;
        } else if let Some(p) = ["{", "}", "[", "]", "=", ";", ","].iter().find(|p| p.starts_with(c)) {
            out.push(Tok::Punct(p));
            i += 1;
        } else if c.is_ascii_alphanumeric() || c == '_' || c == '.' || c == '-' {
            let start = i;
            while i < chars.len()
                && (chars[i].is_ascii_alphanumeric() || chars[i] == '_' || chars[i] == '.')
            {
                i += 1;
            }
            if i == start {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            let numeric = word.chars().next().is_some_and(|c| c.is_ascii_digit() || c == '-' || c == '.');
            if numeric && word.parse::<f64>().is_err() {
                return Err(format!("malformed numeral `{word}`"));
            }
            out.push(Tok::Id(word));
        } else {
            return Err(format!("unexpected character `{c}`"));
        }
    }
    Ok(out)
}

/// Parsed DOT digraph: node attributes and edges.
#[derive(Debug, Default)]
pub struct DotGraph {
    pub nodes: BTreeMap<String, BTreeMap<String, String>>,
    pub edges: Vec<(String, String)>,
}

struct Parser {
    toks: Vec<Tok>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Result<Tok, String> {
        let t = self.toks.get(self.pos).cloned().ok_or("unexpected end of input")?;
        self.pos += 1;
        Ok(t)
    }

    fn punct(&mut self, p: &'static str) -> Result<(), String> {
        match self.next()? {
            Tok::Punct(q) if q == p => Ok(()),
            t => Err(format!("expected `{p}`, found {t:?}")),
        }
    }

    fn id(&mut self) -> Result<String, String> {
        match self.next()? {
            Tok::Id(s) | Tok::Str(s) => Ok(s),
            t => Err(format!("expected identifier, found {t:?}")),
        }
    }

    fn attr_list(&mut self) -> Result<BTreeMap<String, String>, String> {
        let mut attrs = BTreeMap::new();
        while self.peek() == Some(&Tok::Punct("[")) {
            self.pos += 1;
            while self.peek() != Some(&Tok::Punct("]")) {
                let k = self.id()?;
                self.punct("=")?;
                let v = self.id()?;
                attrs.insert(k, v);
                if matches!(self.peek(), Some(Tok::Punct(",")) | Some(Tok::Punct(";"))) {
                    self.pos += 1;
                }
            }
            self.punct("]")?;
        }
        Ok(attrs)
    }
}

/// Small recursive-descent checker for the DOT subset:
/// `digraph ID? { (node_stmt | edge_stmt | attr_stmt | ID = ID) ;? ... }`.
pub fn parse_dot(text: &str) -> Result<DotGraph, String> {
    let mut p = Parser {
        toks: tokenize(text)?,
        pos: 0,
    };
    if p.id()? != "digraph" {
        return Err("expected `digraph`".into());
    }
    if !matches!(p.peek(), Some(Tok::Punct("{"))) {
        p.id()?;
    }
    p.punct("{")?;
    let mut g = DotGraph::default();
    loop {
        match p.peek() {
            None => return Err("missing closing brace".into()),
            Some(Tok::Punct("}")) => {
                p.pos += 1;
                break;
            }
            Some(Tok::Punct(";")) => {
                p.pos += 1;
                continue;
            }
            _ => {}
        }
        let head = p.id()?;
        if ["graph", "node", "edge"].contains(&head.as_str()) {
            p.attr_list()?;
        } else if p.peek() == Some(&Tok::Punct("=")) {
            p.pos += 1;
            p.id()?;
        } else if p.peek() == Some(&Tok::Punct("->")) {
            let mut from = head;
            while p.peek() == Some(&Tok::Punct("->")) {
                p.pos += 1;
                let to = p.id()?;
                g.edges.push((from, to.clone()));
                from = to;
            }
            p.attr_list()?;
        } else {
            let attrs = p.attr_list()?;
            if g.nodes.insert(head.clone(), attrs).is_some() {
                return Err(format!("node {head} declared twice"));
            }
        }
        if p.peek() == Some(&Tok::Punct(";")) {
            p.pos += 1;
        }
    }
    if p.pos != p.toks.len() {
        return Err("trailing tokens after graph".into());
    }
    for (a, b) in &g.edges {
        if !g.nodes.contains_key(a) || !g.nodes.contains_key(b) {
            return Err(format!("edge {a} -> {b} references undeclared node"));
        }
    }
    Ok(g)
}
