//! Textual query syntax.
//!
//! ```text
//! query    = "?" ident ":" [ exists ident { "," ident } ( "." | "·" ) ] formula ;
//! exists   = "exists" | "∃" ;
//! formula  = conj { or conj } ;
//! conj     = unit { and unit } ;
//! unit     = "(" formula ")" | atom ;
//! atom     = label "(" label "," label ")" ;
//! and      = "AND" | "and" | "∧" | "&" ;
//! or       = "OR" | "or" | "∨" | "|" ;
//! label    = bare | quoted ;
//! bare     = { any char except whitespace, "(", ")", ",", '"' } ;
//! quoted   = '"' { char | '\"' | '\\' } '"' ;
//! ident    = ( letter | "_" ) { letter | digit | "_" } ;
//! ```
//!
//! A term that names a declared variable is a variable; any other term is an
//! entity, looked up by label or written `e:<index>`. Predicates are relation
//! labels or `r:<index>`.

use std::collections::BTreeSet;

use super::model::{AnswerSets, AtomId, QueryGraph, QueryInstance, Term};
use super::QueryError;
use crate::kg::{Dictionary, EntityId, RelationId};

/// Resolves and prints entity and relation names.
#[derive(Clone, Copy, Debug)]
pub enum Vocab<'a> {
    Labels {
        entities: &'a Dictionary,
        relations: &'a Dictionary,
    },
    /// No dictionaries: only `e:<n>` / `r:<n>` forms.
    Numeric { entities: usize, relations: usize },
}

impl<'a> Vocab<'a> {
    pub fn labels(entities: &'a Dictionary, relations: &'a Dictionary) -> Self {
        Vocab::Labels { entities, relations }
    }

    fn counts(&self) -> (usize, usize) {
        match self {
            Vocab::Labels { entities, relations } => (entities.len(), relations.len()),
            Vocab::Numeric { entities, relations } => (*entities, *relations),
        }
    }

    pub fn entity(&self, token: &str) -> Option<EntityId> {
        if let Vocab::Labels { entities, .. } = self {
            if let Some(i) = entities.index_of(token) {
                return Some(EntityId(i));
            }
        }
        numeric(token, "e:", self.counts().0).map(EntityId)
    }

    pub fn relation(&self, token: &str) -> Option<RelationId> {
        if let Vocab::Labels { relations, .. } = self {
            if let Some(i) = relations.index_of(token) {
                return Some(RelationId(i));
            }
        }
        numeric(token, "r:", self.counts().1).map(RelationId)
    }

    pub fn entity_name(&self, e: EntityId) -> String {
        match self {
            Vocab::Labels { entities, .. } => entities.label(e.0).map(str::to_string).unwrap_or_else(|| e.to_string()),
            Vocab::Numeric { .. } => e.to_string(),
        }
    }

    pub fn relation_name(&self, r: RelationId) -> String {
        match self {
            Vocab::Labels { relations, .. } => relations
                .label(r.0)
                .map(str::to_string)
                .unwrap_or_else(|| r.to_string()),
            Vocab::Numeric { .. } => r.to_string(),
        }
    }
}

fn numeric(token: &str, prefix: &str, bound: usize) -> Option<u32> {
    let n: u32 = token.strip_prefix(prefix)?.parse().ok()?;
    ((n as usize) < bound).then_some(n)
}

/// Parses a query and infers its shape. The result has empty answer sets.
pub fn parse_query(text: &str, vocab: &Vocab<'_>) -> Result<QueryInstance, QueryError> {
    let graph = Parser {
        src: text,
        pos: 0,
        vocab,
    }
    .query()?;
    QueryInstance::new(graph, AnswerSets::default())
}

/// Renders a query back into the textual syntax accepted by [`parse_query`].
pub fn render(q: &QueryGraph, vocab: &Vocab<'_>) -> String {
    let vars = q.vars();
    let mut out = format!("?{}:", vars[q.target()]);
    let exists: Vec<&str> = (0..vars.len())
        .filter(|&v| v != q.target())
        .map(|v| vars[v].as_str())
        .collect();
    if !exists.is_empty() {
        out.push_str(&format!(" exists {} .", exists.join(", ")));
    }
    out.push(' ');
    out.push_str(&render_body(q, vocab));
    out
}

/// Renders one atom, e.g. `r1(A, V1)`.
pub fn render_atom(q: &QueryGraph, atom: AtomId, vocab: &Vocab<'_>) -> String {
    let a = &q.atoms()[atom];
    let term = |t: Term| match t {
        Term::Var(v) => q.vars()[v].clone(),
        Term::Anchor(e) => quote(&vocab.entity_name(e), q.vars()),
    };
    format!(
        "{}({}, {})",
        quote(&vocab.relation_name(a.predicate), q.vars()),
        term(a.subject),
        term(a.object)
    )
}

fn render_body(q: &QueryGraph, vocab: &Vocab<'_>) -> String {
    let dnf = q.dnf();
    let conj = |ids: &[AtomId]| -> String {
        ids.iter()
            .map(|&a| render_atom(q, a, vocab))
            .collect::<Vec<_>>()
            .join(" AND ")
    };
    if dnf.len() == 1 {
        return conj(&dnf[0]);
    }
    let common: BTreeSet<AtomId> = dnf[1..].iter().fold(dnf[0].iter().copied().collect(), |acc, c| {
        acc.intersection(&c.iter().copied().collect()).copied().collect()
    });
    let branches: Vec<Vec<AtomId>> = dnf
        .iter()
        .map(|c| c.iter().copied().filter(|a| !common.contains(a)).collect())
        .collect();
    let union = branches
        .iter()
        .map(|b| if b.len() > 1 { format!("({})", conj(b)) } else { conj(b) })
        .collect::<Vec<_>>()
        .join(" OR ");
    if common.is_empty() {
        return union;
    }
    // Keep textual order equal to atom order so a re-parse assigns the same ids.
    let union_first = branches.iter().flatten().min() < common.iter().next();
    let mut pieces: Vec<(AtomId, String)> = common.iter().map(|&a| (a, render_atom(q, a, vocab))).collect();
    let union_key = if union_first { 0 } else { usize::MAX };
    pieces.push((union_key, format!("({union})")));
    pieces.sort_by_key(|(k, _)| *k);
    pieces.into_iter().map(|(_, s)| s).collect::<Vec<_>>().join(" AND ")
}

const KEYWORDS: [&str; 5] = ["AND", "OR", "and", "or", "exists"];

fn quote(label: &str, vars: &[String]) -> String {
    let needs = label.is_empty()
        || label
            .chars()
            .any(|c| c.is_whitespace() || matches!(c, '(' | ')' | ',' | '"' | '\\'))
        || KEYWORDS.contains(&label)
        || vars.iter().any(|v| v == label);
    if !needs {
        return label.to_string();
    }
    let mut out = String::with_capacity(label.len() + 2);
    out.push('"');
    for c in label.chars() {
        if matches!(c, '"' | '\\') {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

enum Formula {
    Atom(AtomId),
    And(Vec<Formula>),
    Or(Vec<Formula>),
}

impl Formula {
    fn dnf(&self) -> Vec<Vec<AtomId>> {
        match self {
            Formula::Atom(a) => vec![vec![*a]],
            Formula::Or(parts) => parts.iter().flat_map(Formula::dnf).collect(),
            Formula::And(parts) => parts.iter().fold(vec![Vec::new()], |acc, p| {
                let rhs = p.dnf();
                acc.iter()
                    .flat_map(|l| {
                        rhs.iter().map(move |r| {
                            let mut c = l.clone();
                            c.extend(r);
                            c
                        })
                    })
                    .collect()
            }),
        }
    }
}

struct Parser<'s, 'v> {
    src: &'s str,
    pos: usize,
    vocab: &'v Vocab<'v>,
}

struct Scope {
    names: Vec<String>,
    atoms: Vec<(Term, RelationId, Term)>,
}

impl Parser<'_, '_> {
    fn error<T>(&self, position: usize, message: impl Into<String>) -> Result<T, QueryError> {
        Err(QueryError::Syntax {
            position,
            message: message.into(),
        })
    }

    fn rest(&self) -> &str {
        &self.src[self.pos..]
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.src.len() - trimmed.len();
    }

    fn eat_char(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn expect_char(&mut self, c: char) -> Result<(), QueryError> {
        if self.eat_char(c) {
            Ok(())
        } else {
            self.error(self.pos, format!("expected `{c}`"))
        }
    }

    fn eat_keyword(&mut self, options: &[&str]) -> bool {
        self.skip_ws();
        for kw in options {
            if let Some(after) = self.rest().strip_prefix(kw) {
                let word = kw.chars().all(|c| c.is_ascii_alphabetic());
                let boundary = after.chars().next().is_none_or(|c| !(c.is_alphanumeric() || c == '_'));
                if !word || boundary {
                    self.pos += kw.len();
                    return true;
                }
            }
        }
        false
    }

    fn ident(&mut self) -> Result<String, QueryError> {
        self.skip_ws();
        let start = self.pos;
        let len: usize = self
            .rest()
            .char_indices()
            .take_while(|&(i, c)| c == '_' || c.is_ascii_alphabetic() || (i > 0 && c.is_ascii_digit()))
            .map(|(_, c)| c.len_utf8())
            .sum();
        if len == 0 {
            return self.error(start, "expected a variable name");
        }
        self.pos += len;
        Ok(self.src[start..self.pos].to_string())
    }

    /// Returns the label and whether it was quoted.
    fn label(&mut self) -> Result<(String, bool), QueryError> {
        self.skip_ws();
        let start = self.pos;
        if self.peek() == Some('"') {
            self.pos += 1;
            let mut out = String::new();
            let mut chars = self.rest().char_indices();
            while let Some((i, c)) = chars.next() {
                match c {
                    '"' => {
                        self.pos += i + 1;
                        return Ok((out, true));
                    }
                    '\\' => match chars.next() {
                        Some((_, esc)) => out.push(esc),
                        None => break,
                    },
                    c => out.push(c),
                }
            }
            return self.error(start, "unterminated quoted label");
        }
        let len: usize = self
            .rest()
            .chars()
            .take_while(|&c| !(c.is_whitespace() || matches!(c, '(' | ')' | ',' | '"')))
            .map(char::len_utf8)
            .sum();
        if len == 0 {
            return self.error(start, "expected a label");
        }
        self.pos += len;
        Ok((self.src[start..self.pos].to_string(), false))
    }

    fn query(&mut self) -> Result<QueryGraph, QueryError> {
        self.expect_char('?')?;
        let target = self.ident()?;
        self.expect_char(':')?;
        let mut names = vec![target];
        if self.eat_keyword(&["exists", "∃"]) {
            loop {
                let at = self.pos;
                let name = self.ident()?;
                if names.contains(&name) {
                    return self.error(at, format!("variable `{name}` declared twice"));
                }
                names.push(name);
                if !self.eat_char(',') {
                    break;
                }
            }
            if !(self.eat_char('.') || self.eat_char('·')) {
                return self.error(self.pos, "expected `.` after the quantified variables");
            }
        }
        let mut scope = Scope {
            names,
            atoms: Vec::new(),
        };
        let formula = self.formula(&mut scope)?;
        self.skip_ws();
        if self.pos != self.src.len() {
            return self.error(self.pos, "unexpected trailing input");
        }
        QueryGraph::new(scope.names, 0, scope.atoms, formula.dnf())
    }

    fn formula(&mut self, scope: &mut Scope) -> Result<Formula, QueryError> {
        let mut parts = vec![self.conj(scope)?];
        while self.eat_keyword(&["OR", "or", "∨", "|"]) {
            parts.push(self.conj(scope)?);
        }
        Ok(if parts.len() == 1 {
            parts.pop().unwrap()
        } else {
            Formula::Or(parts)
        })
    }

    fn conj(&mut self, scope: &mut Scope) -> Result<Formula, QueryError> {
        let mut parts = vec![self.unit(scope)?];
        while self.eat_keyword(&["AND", "and", "∧", "&"]) {
            parts.push(self.unit(scope)?);
        }
        Ok(if parts.len() == 1 {
            parts.pop().unwrap()
        } else {
            Formula::And(parts)
        })
    }

    fn unit(&mut self, scope: &mut Scope) -> Result<Formula, QueryError> {
        if self.eat_char('(') {
            let f = self.formula(scope)?;
            self.expect_char(')')?;
            return Ok(f);
        }
        self.atom(scope)
    }

    fn atom(&mut self, scope: &mut Scope) -> Result<Formula, QueryError> {
        self.skip_ws();
        let start = self.pos;
        let (pred, _) = self.label()?;
        let predicate = self
            .vocab
            .relation(&pred)
            .ok_or_else(|| QueryError::UnknownRelation(pred.clone()))?;
        self.expect_char('(')?;
        let subject = self.term(scope)?;
        self.expect_char(',')?;
        let object = self.term(scope)?;
        self.expect_char(')')?;
        if subject == object && subject.as_var().is_some() {
            return self.error(start, "atom relates a variable to itself");
        }
        if object.as_var().is_none() {
            return self.error(start, "atom object must be a variable");
        }
        scope.atoms.push((subject, predicate, object));
        Ok(Formula::Atom(scope.atoms.len() - 1))
    }

    fn term(&mut self, scope: &Scope) -> Result<Term, QueryError> {
        let (label, quoted) = self.label()?;
        if !quoted {
            if let Some(v) = scope.names.iter().position(|n| *n == label) {
                return Ok(Term::Var(v));
            }
        }
        self.vocab
            .entity(&label)
            .map(Term::Anchor)
            .ok_or(QueryError::UnknownEntity(label))
    }
}
