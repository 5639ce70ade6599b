//! Document type definitions: parsing, conformance checking and the
//! structural relations used for query building and result-DTD synthesis.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;

use indexmap::IndexMap;
use serde::Serialize;
use thiserror::Error;

use crate::xml::{AttrType, AttributeTypes, Document, NodeId, NodeKind};

/// Content model of an element.
///
/// `EmptySym` is the transient "nothing here" marker used while rewriting
/// result content definitions; it never survives into a finished [`Dtd`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ContentDef {
    Element(String),
    Pcdata,
    Empty,
    Any,
    /// `(#PCDATA | a | b)*`
    Mixed(Vec<String>),
    Seq(Vec<ContentDef>),
    Choice(Vec<ContentDef>),
    Opt(Box<ContentDef>),
    Star(Box<ContentDef>),
    Plus(Box<ContentDef>),
    EmptySym,
}

impl ContentDef {
    pub fn element(name: &str) -> Self {
        ContentDef::Element(name.to_owned())
    }

    /// Sequence; a single operand stands for itself.
    pub fn seq(mut items: Vec<ContentDef>) -> Self {
        assert!(!items.is_empty(), "sequence needs at least one operand");
        if items.len() == 1 {
            items.pop().unwrap()
        } else {
            ContentDef::Seq(items)
        }
    }

    /// Choice; a single operand stands for itself.
    pub fn choice(mut items: Vec<ContentDef>) -> Self {
        assert!(!items.is_empty(), "choice needs at least one operand");
        if items.len() == 1 {
            items.pop().unwrap()
        } else {
            ContentDef::Choice(items)
        }
    }

    pub fn opt(inner: ContentDef) -> Self {
        ContentDef::Opt(Box::new(inner))
    }

    pub fn star(inner: ContentDef) -> Self {
        ContentDef::Star(Box::new(inner))
    }

    pub fn plus(inner: ContentDef) -> Self {
        ContentDef::Plus(Box::new(inner))
    }

    /// Number of nodes in the expression tree.
    pub fn size(&self) -> usize {
        match self {
            ContentDef::Seq(xs) | ContentDef::Choice(xs) => {
                1 + xs.iter().map(ContentDef::size).sum::<usize>()
            }
            ContentDef::Opt(x) | ContentDef::Star(x) | ContentDef::Plus(x) => 1 + x.size(),
            ContentDef::Mixed(names) => 1 + names.len(),
            _ => 1,
        }
    }

    pub fn contains_empty_sym(&self) -> bool {
        match self {
            ContentDef::EmptySym => true,
            ContentDef::Seq(xs) | ContentDef::Choice(xs) => xs.iter().any(Self::contains_empty_sym),
            ContentDef::Opt(x) | ContentDef::Star(x) | ContentDef::Plus(x) => x.contains_empty_sym(),
            _ => false,
        }
    }

    /// Element names referenced, deduplicated, in order of first occurrence.
    pub fn element_refs(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_refs(&mut out);
        let mut seen = HashSet::new();
        out.retain(|n| seen.insert(*n));
        out
    }

    fn collect_refs<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            ContentDef::Element(n) => out.push(n),
            ContentDef::Mixed(ns) => out.extend(ns.iter().map(String::as_str)),
            ContentDef::Seq(xs) | ContentDef::Choice(xs) => {
                xs.iter().for_each(|x| x.collect_refs(out))
            }
            ContentDef::Opt(x) | ContentDef::Star(x) | ContentDef::Plus(x) => x.collect_refs(out),
            _ => {}
        }
    }

    pub fn allows_text(&self) -> bool {
        matches!(self, ContentDef::Pcdata | ContentDef::Mixed(_) | ContentDef::Any)
    }
}

impl fmt::Display for ContentDef {
    /// Top-level content model as written in an element declaration.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ContentDef::Empty => f.write_str("EMPTY"),
            ContentDef::Any => f.write_str("ANY"),
            ContentDef::Pcdata => f.write_str("(#PCDATA)"),
            ContentDef::Mixed(ns) if ns.is_empty() => f.write_str("(#PCDATA)*"),
            ContentDef::Mixed(ns) => write!(f, "(#PCDATA|{})*", ns.join("|")),
            ContentDef::Element(n) => write!(f, "({n})"),
            ContentDef::Seq(_) | ContentDef::Choice(_) => f.write_str(&particle(self)),
            ContentDef::Opt(x) | ContentDef::Star(x) | ContentDef::Plus(x) => {
                let inner = match **x {
                    ContentDef::Seq(_) | ContentDef::Choice(_) => particle(x),
                    _ => format!("({})", particle(x)),
                };
                write!(f, "{inner}{}", modifier(self))
            }
            ContentDef::EmptySym => f.write_str("\u{2205}"),
        }
    }
}

fn modifier(cd: &ContentDef) -> &'static str {
    match cd {
        ContentDef::Opt(_) => "?",
        ContentDef::Star(_) => "*",
        ContentDef::Plus(_) => "+",
        _ => "",
    }
}

fn particle(cd: &ContentDef) -> String {
    match cd {
        ContentDef::Element(n) => n.clone(),
        ContentDef::Seq(xs) => format!("({})", xs.iter().map(particle).collect::<Vec<_>>().join(",")),
        ContentDef::Choice(xs) => {
            format!("({})", xs.iter().map(particle).collect::<Vec<_>>().join("|"))
        }
        ContentDef::Opt(x) | ContentDef::Star(x) | ContentDef::Plus(x) => {
            let inner = match **x {
                ContentDef::Element(_) | ContentDef::Seq(_) | ContentDef::Choice(_) => particle(x),
                _ => format!("({})", particle(x)),
            };
            format!("{inner}{}", modifier(cd))
        }
        ContentDef::Pcdata => "#PCDATA".into(),
        ContentDef::Empty => "EMPTY".into(),
        ContentDef::Any => "ANY".into(),
        ContentDef::Mixed(_) => cd.to_string(),
        ContentDef::EmptySym => "\u{2205}".into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Presence {
    Required,
    Implied,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AttDef {
    pub name: String,
    pub ty: AttrType,
    pub presence: Presence,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DtdError {
    #[error("DTD syntax error at {line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("element {element:?} referenced by {by:?} is not defined")]
    UnknownElement { element: String, by: String },
    #[error("element {0:?} is defined more than once")]
    DuplicateElement(String),
    #[error("invalid DTD: {0}")]
    Invalid(String),
    #[error("contract violation: {0}")]
    Contract(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dtd {
    root: String,
    elements: IndexMap<String, ContentDef>,
    attlists: IndexMap<String, Vec<AttDef>>,
}

impl Dtd {
    /// Assembles a DTD, checking that every reference is defined and the
    /// root element exists.
    pub fn new(
        root: &str,
        elements: IndexMap<String, ContentDef>,
        attlists: IndexMap<String, Vec<AttDef>>,
    ) -> Result<Self, DtdError> {
        if !elements.contains_key(root) {
            return Err(DtdError::UnknownElement {
                element: root.to_owned(),
                by: "root element name".into(),
            });
        }
        for (name, cd) in &elements {
            if let Some(missing) = cd.element_refs().into_iter().find(|r| !elements.contains_key(*r)) {
                return Err(DtdError::UnknownElement {
                    element: missing.to_owned(),
                    by: name.clone(),
                });
            }
        }
        for (name, atts) in &attlists {
            if !elements.contains_key(name) {
                return Err(DtdError::UnknownElement {
                    element: name.clone(),
                    by: "ATTLIST".into(),
                });
            }
            if atts.iter().filter(|a| a.ty == AttrType::Id).count() > 1 {
                return Err(DtdError::Invalid(format!(
                    "element {name:?} declares more than one ID attribute"
                )));
            }
            let mut seen = HashSet::new();
            if let Some(dup) = atts.iter().find(|a| !seen.insert(a.name.as_str())) {
                return Err(DtdError::Invalid(format!(
                    "attribute {:?} of {name:?} declared twice",
                    dup.name
                )));
            }
        }
        Ok(Dtd {
            root: root.to_owned(),
            elements,
            attlists,
        })
    }

    pub fn root(&self) -> &str {
        &self.root
    }

    /// The same declarations with another designated root.
    pub fn with_root(&self, root: &str) -> Result<Self, DtdError> {
        Dtd::new(root, self.elements.clone(), self.attlists.clone())
    }

    pub fn elements(&self) -> &IndexMap<String, ContentDef> {
        &self.elements
    }

    pub fn content(&self, element: &str) -> Option<&ContentDef> {
        self.elements.get(element)
    }

    pub fn attlists(&self) -> &IndexMap<String, Vec<AttDef>> {
        &self.attlists
    }

    pub fn attributes(&self, element: &str) -> &[AttDef] {
        self.attlists.get(element).map_or(&[], Vec::as_slice)
    }

    pub fn attribute(&self, element: &str, name: &str) -> Option<&AttDef> {
        self.attributes(element).iter().find(|a| a.name == name)
    }

    /// Total size: one per element declaration plus its content expression,
    /// plus one per attribute definition.
    pub fn size(&self) -> usize {
        self.elements.values().map(|cd| 1 + cd.size()).sum::<usize>()
            + self.attlists.values().map(Vec::len).sum::<usize>()
    }

    /// Element names reachable from `element` through one or more content
    /// definitions (strict: `element` itself only if it is recursive).
    pub fn descendants_of(&self, element: &str) -> BTreeSet<String> {
        self.reach(std::iter::once(element), |e| self.child_names(e))
    }

    /// Element names allowed directly inside `element`; `ANY` admits every
    /// declared element.
    pub fn child_names(&self, element: &str) -> Vec<&str> {
        match self.content(element) {
            Some(ContentDef::Any) => self.elements.keys().map(String::as_str).collect(),
            Some(cd) => cd.element_refs(),
            None => Vec::new(),
        }
    }

    /// Element names from which `element` is reachable.
    pub fn ancestors_of(&self, element: &str) -> BTreeSet<String> {
        let parents = self.parent_index();
        self.reach(std::iter::once(element), |e| {
            parents.get(e).cloned().unwrap_or_default()
        })
    }

    pub(crate) fn parent_index(&self) -> HashMap<&str, Vec<&str>> {
        let mut parents: HashMap<&str, Vec<&str>> = HashMap::new();
        for name in self.elements.keys() {
            for r in self.child_names(name) {
                parents.entry(r).or_default().push(name);
            }
        }
        parents
    }

    /// Strict reachability from the `start` set along `step`.
    pub(crate) fn reach<'a, I, F>(&'a self, start: I, step: F) -> BTreeSet<String>
    where
        I: IntoIterator<Item = &'a str>,
        F: Fn(&str) -> Vec<&'a str>,
    {
        let mut seen: HashSet<&str> = HashSet::new();
        let mut queue: VecDeque<&str> = start.into_iter().flat_map(&step).collect();
        while let Some(e) = queue.pop_front() {
            if seen.insert(e) {
                queue.extend(step(e));
            }
        }
        seen.into_iter().map(str::to_owned).collect()
    }

    /// True iff `descendant` may be nested (at any depth) inside `element`.
    pub fn dtd_descendant(&self, element: &str, descendant: &str) -> bool {
        self.descendants_of(element).contains(descendant)
    }

    /// Per-element structure for interactive query building.
    pub fn tree_view(&self) -> DtdTree {
        DtdTree {
            root: self.root.clone(),
            elements: self
                .elements
                .iter()
                .map(|(name, cd)| ElementView {
                    name: name.clone(),
                    children: self.child_names(name).into_iter().map(str::to_owned).collect(),
                    attributes: self.attributes(name).iter().map(|a| a.name.clone()).collect(),
                    pcdata: cd.allows_text(),
                    content: cd.to_string(),
                })
                .collect(),
        }
    }
}

impl AttributeTypes for Dtd {
    fn attribute_type(&self, element: &str, attribute: &str) -> AttrType {
        self.attribute(element, attribute)
            .map_or(AttrType::Cdata, |a| a.ty)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DtdTree {
    pub root: String,
    pub elements: Vec<ElementView>,
}

impl DtdTree {
    pub fn element(&self, name: &str) -> Option<&ElementView> {
        self.elements.iter().find(|e| e.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ElementView {
    pub name: String,
    pub children: Vec<String>,
    pub attributes: Vec<String>,
    pub pcdata: bool,
    pub content: String,
}

// ---------------------------------------------------------------------------
// Parsing

/// Parses ELEMENT and ATTLIST declarations. The first declared element is the
/// root element name.
pub fn parse_dtd(text: &str) -> Result<Dtd, DtdError> {
    parse_dtd_with_root(text, None)
}

pub fn parse_dtd_with_root(text: &str, root: Option<&str>) -> Result<Dtd, DtdError> {
    let mut p = Parser { src: text, pos: 0 };
    let mut elements: IndexMap<String, ContentDef> = IndexMap::new();
    let mut attlists: IndexMap<String, Vec<AttDef>> = IndexMap::new();
    loop {
        p.skip_misc()?;
        if p.eof() {
            break;
        }
        let at = p.pos;
        if p.eat("<!ELEMENT") {
            p.require_space()?;
            let name = p.name()?;
            p.require_space()?;
            let cd = p.content_spec()?;
            p.skip_ws();
            p.expect(">")?;
            if elements.insert(name.clone(), cd).is_some() {
                return Err(DtdError::DuplicateElement(name));
            }
        } else if p.eat("<!ATTLIST") {
            p.require_space()?;
            let element = p.name()?;
            let list = attlists.entry(element).or_default();
            loop {
                p.skip_ws();
                if p.eat(">") {
                    break;
                }
                let name = p.name()?;
                p.require_space()?;
                let ty_at = p.pos;
                let ty = match p.name()?.as_str() {
                    "CDATA" => AttrType::Cdata,
                    "ID" => AttrType::Id,
                    "IDREF" => AttrType::IdRef,
                    other => {
                        return Err(p.error_at(
                            ty_at,
                            format!("unsupported attribute type {other} (only CDATA, ID, IDREF)"),
                        ))
                    }
                };
                p.require_space()?;
                let presence = if p.eat("#REQUIRED") {
                    Presence::Required
                } else if p.eat("#IMPLIED") {
                    Presence::Implied
                } else {
                    return Err(p.error("unsupported default declaration (only #REQUIRED, #IMPLIED)"));
                };
                list.push(AttDef { name, ty, presence });
            }
        } else {
            return Err(p.error_at(at, "expected <!ELEMENT or <!ATTLIST declaration"));
        }
    }
    let root = match root {
        Some(r) => r.to_owned(),
        None => elements
            .keys()
            .next()
            .cloned()
            .ok_or_else(|| DtdError::Invalid("no element declarations".into()))?,
    };
    Dtd::new(&root, elements, attlists)
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn eof(&self) -> bool {
        self.pos >= self.src.len()
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn eat(&mut self, s: &str) -> bool {
        if self.rest().starts_with(s) {
            self.pos += s.len();
            true
        } else {
            false
        }
    }

    fn error(&self, msg: impl Into<String>) -> DtdError {
        self.error_at(self.pos, msg)
    }

    fn error_at(&self, pos: usize, msg: impl Into<String>) -> DtdError {
        let before = &self.src[..pos];
        let line = before.matches('\n').count() + 1;
        let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
        DtdError::Syntax {
            line,
            column,
            message: msg.into(),
        }
    }

    fn expect(&mut self, s: &str) -> Result<(), DtdError> {
        if self.eat(s) {
            Ok(())
        } else {
            Err(self.error(format!("expected {s:?}")))
        }
    }

    fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.src.len() - trimmed.len();
    }

    fn require_space(&mut self) -> Result<(), DtdError> {
        if !self.peek().is_some_and(char::is_whitespace) {
            return Err(self.error("expected whitespace"));
        }
        self.skip_ws();
        Ok(())
    }

    fn skip_misc(&mut self) -> Result<(), DtdError> {
        loop {
            self.skip_ws();
            if self.rest().starts_with("<!--") {
                let end = self
                    .rest()
                    .find("-->")
                    .ok_or_else(|| self.error("unterminated comment"))?;
                self.pos += end + 3;
            } else if self.rest().starts_with("<?") {
                let end = self
                    .rest()
                    .find("?>")
                    .ok_or_else(|| self.error("unterminated processing instruction"))?;
                self.pos += end + 2;
            } else {
                return Ok(());
            }
        }
    }

    fn name(&mut self) -> Result<String, DtdError> {
        let len = self
            .rest()
            .find(|c: char| !(c.is_alphanumeric() || matches!(c, '_' | '-' | '.' | ':')))
            .unwrap_or(self.rest().len());
        if len == 0 {
            return Err(self.error("expected a name"));
        }
        let name = self.rest()[..len].to_owned();
        self.pos += len;
        Ok(name)
    }

    fn content_spec(&mut self) -> Result<ContentDef, DtdError> {
        if self.eat("EMPTY") {
            return Ok(ContentDef::Empty);
        }
        if self.eat("ANY") {
            return Ok(ContentDef::Any);
        }
        let start = self.pos;
        self.expect("(")?;
        self.skip_ws();
        if self.eat("#PCDATA") {
            let mut names = Vec::new();
            loop {
                self.skip_ws();
                if self.eat(")") {
                    break;
                }
                self.expect("|")?;
                self.skip_ws();
                names.push(self.name()?);
            }
            let starred = self.eat("*");
            return if names.is_empty() {
                Ok(ContentDef::Pcdata)
            } else if starred {
                Ok(ContentDef::Mixed(names))
            } else {
                Err(self.error_at(start, "mixed content with element names must end in )*"))
            };
        }
        self.pos = start;
        self.particle()
    }

    fn particle(&mut self) -> Result<ContentDef, DtdError> {
        let base = if self.eat("(") {
            let mut items = vec![];
            let mut sep: Option<char> = None;
            loop {
                self.skip_ws();
                items.push(self.particle()?);
                self.skip_ws();
                if self.eat(")") {
                    break;
                }
                let c = self.peek().ok_or_else(|| self.error("unterminated group"))?;
                if !matches!(c, ',' | '|') {
                    return Err(self.error("expected ',', '|' or ')'"));
                }
                if sep.is_some_and(|s| s != c) {
                    return Err(self.error("cannot mix ',' and '|' in one group"));
                }
                sep = Some(c);
                self.pos += 1;
            }
            match sep {
                Some('|') => ContentDef::choice(items),
                _ => ContentDef::seq(items),
            }
        } else {
            ContentDef::Element(self.name()?)
        };
        Ok(if self.eat("?") {
            ContentDef::opt(base)
        } else if self.eat("*") {
            ContentDef::star(base)
        } else if self.eat("+") {
            ContentDef::plus(base)
        } else {
            base
        })
    }
}

// ---------------------------------------------------------------------------
// Serialization

pub fn serialize_dtd(d: &Dtd) -> Result<String, DtdError> {
    let mut out = String::new();
    for (name, cd) in &d.elements {
        if cd.contains_empty_sym() {
            return Err(DtdError::Contract(format!(
                "content definition of {name:?} still contains the empty marker"
            )));
        }
        out.push_str(&format!("<!ELEMENT {name} {cd}>\n"));
        let atts = d.attributes(name);
        if !atts.is_empty() {
            out.push_str(&format!("<!ATTLIST {name}"));
            let pad = " ".repeat("<!ATTLIST ".len() + name.len());
            for (i, a) in atts.iter().enumerate() {
                let ty = match a.ty {
                    AttrType::Cdata => "CDATA",
                    AttrType::Id => "ID",
                    AttrType::IdRef => "IDREF",
                };
                let presence = match a.presence {
                    Presence::Required => "#REQUIRED",
                    Presence::Implied => "#IMPLIED",
                };
                if i > 0 {
                    out.push('\n');
                    out.push_str(&pad);
                }
                out.push_str(&format!(" {} {ty} {presence}", a.name));
            }
            out.push_str(">\n");
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Content model automaton

#[derive(Debug, Clone)]
enum Edge {
    Eps(usize),
    Sym(String, usize),
    Wild(usize),
}

/// Thompson automaton over element names.
#[derive(Debug, Clone)]
struct Nfa {
    edges: Vec<Vec<Edge>>,
    start: usize,
    accept: usize,
}

impl Nfa {
    fn compile(cd: &ContentDef) -> Nfa {
        let mut nfa = Nfa {
            edges: Vec::new(),
            start: 0,
            accept: 0,
        };
        let (s, t) = nfa.fragment(cd);
        nfa.start = s;
        nfa.accept = t;
        nfa
    }

    fn state(&mut self) -> usize {
        self.edges.push(Vec::new());
        self.edges.len() - 1
    }

    fn fragment(&mut self, cd: &ContentDef) -> (usize, usize) {
        let s = self.state();
        let t = self.state();
        match cd {
            ContentDef::Element(n) => self.edges[s].push(Edge::Sym(n.clone(), t)),
            ContentDef::Pcdata | ContentDef::Empty | ContentDef::EmptySym => {
                self.edges[s].push(Edge::Eps(t))
            }
            ContentDef::Any => {
                self.edges[s].push(Edge::Eps(t));
                self.edges[t].push(Edge::Wild(t));
            }
            ContentDef::Mixed(ns) => {
                self.edges[s].push(Edge::Eps(t));
                for n in ns {
                    self.edges[t].push(Edge::Sym(n.clone(), t));
                }
            }
            ContentDef::Seq(xs) => {
                let mut cur = s;
                for x in xs {
                    let (a, b) = self.fragment(x);
                    self.edges[cur].push(Edge::Eps(a));
                    cur = b;
                }
                self.edges[cur].push(Edge::Eps(t));
            }
            ContentDef::Choice(xs) => {
                for x in xs {
                    let (a, b) = self.fragment(x);
                    self.edges[s].push(Edge::Eps(a));
                    self.edges[b].push(Edge::Eps(t));
                }
            }
            ContentDef::Opt(x) | ContentDef::Star(x) | ContentDef::Plus(x) => {
                let (a, b) = self.fragment(x);
                self.edges[s].push(Edge::Eps(a));
                self.edges[b].push(Edge::Eps(t));
                if !matches!(cd, ContentDef::Plus(_)) {
                    self.edges[s].push(Edge::Eps(t));
                }
                if !matches!(cd, ContentDef::Opt(_)) {
                    self.edges[b].push(Edge::Eps(a));
                }
            }
        }
        (s, t)
    }

    fn closure(&self, set: &mut [bool]) {
        let mut stack: Vec<usize> = (0..set.len()).filter(|&i| set[i]).collect();
        while let Some(q) = stack.pop() {
            for e in &self.edges[q] {
                if let Edge::Eps(r) = *e {
                    if !set[r] {
                        set[r] = true;
                        stack.push(r);
                    }
                }
            }
        }
    }

    fn accepts<S: AsRef<str>>(&self, word: &[S]) -> bool {
        let mut cur = vec![false; self.edges.len()];
        cur[self.start] = true;
        self.closure(&mut cur);
        for sym in word {
            let sym = sym.as_ref();
            let mut next = vec![false; self.edges.len()];
            for (q, active) in cur.iter().enumerate() {
                if !active {
                    continue;
                }
                for e in &self.edges[q] {
                    match e {
                        Edge::Sym(n, r) if n == sym => next[*r] = true,
                        Edge::Wild(r) => next[*r] = true,
                        _ => {}
                    }
                }
            }
            self.closure(&mut next);
            if !next.iter().any(|b| *b) {
                return false;
            }
            cur = next;
        }
        cur[self.accept]
    }
}

/// Whether a child sequence (element names) plus the presence of character
/// data is allowed by `cd`.
pub fn content_model_matches<S: AsRef<str>>(cd: &ContentDef, children: &[S], has_text: bool) -> bool {
    match cd {
        ContentDef::Any | ContentDef::Mixed(_) => true,
        ContentDef::Pcdata => children.is_empty(),
        ContentDef::Empty | ContentDef::EmptySym => children.is_empty() && !has_text,
        _ => !has_text && Nfa::compile(cd).accepts(children),
    }
}

// ---------------------------------------------------------------------------
// Conformance

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub node: Option<usize>,
    pub message: String,
}

/// Outcome of a conformance check with every violation found.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Conformance {
    pub violations: Vec<Violation>,
}

impl Conformance {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, node: Option<NodeId>, message: String) {
        self.violations.push(Violation {
            node: node.map(NodeId::index),
            message,
        });
    }
}

/// Ordinary conformance: content models, declared and required attributes,
/// ID uniqueness and IDREF resolution.
pub fn conforms(doc: &Document, d: &Dtd) -> Conformance {
    let mut report = Conformance::default();
    let mut automata: HashMap<&str, Nfa> = HashMap::new();
    let mut ids: HashMap<&str, NodeId> = HashMap::new();
    let mut idrefs: Vec<(NodeId, &str)> = Vec::new();

    for (id, node) in doc.nodes() {
        if node.kind != NodeKind::Element {
            continue;
        }
        let name = node.value.as_str();
        let Some(cd) = d.content(name) else {
            report.push(Some(id), format!("element {name:?} is not declared"));
            continue;
        };
        let mut kids: Vec<&str> = Vec::new();
        let mut has_text = false;
        for &c in doc.children(id) {
            let child = doc.node(c);
            match child.kind {
                NodeKind::Element => kids.push(&child.value),
                NodeKind::Text => has_text = true,
                NodeKind::Attribute(_) => {
                    let att = child.value.as_str();
                    match d.attribute(name, att) {
                        None => report.push(
                            Some(c),
                            format!("attribute {att:?} is not declared for {name:?}"),
                        ),
                        Some(def) => {
                            let value = doc.attribute_value(c);
                            match def.ty {
                                AttrType::Id => {
                                    if ids.insert(value, id).is_some() {
                                        report.push(Some(c), format!("duplicate ID value {value:?}"));
                                    }
                                }
                                AttrType::IdRef => idrefs.push((c, value)),
                                AttrType::Cdata => {}
                            }
                        }
                    }
                }
            }
        }
        let ok = match cd {
            ContentDef::Any | ContentDef::Mixed(_) | ContentDef::Pcdata | ContentDef::Empty => {
                content_model_matches(cd, &kids, has_text)
            }
            _ => {
                !has_text
                    && automata
                        .entry(name)
                        .or_insert_with(|| Nfa::compile(cd))
                        .accepts(&kids)
            }
        };
        if !ok {
            report.push(
                Some(id),
                format!(
                    "children of {name:?} [{}]{} do not match {cd}",
                    kids.join(","),
                    if has_text { " with text" } else { "" }
                ),
            );
        }
        for def in d.attributes(name) {
            if def.presence == Presence::Required
                && !doc.attributes(id).any(|a| doc.node(a).value == def.name)
            {
                report.push(
                    Some(id),
                    format!("required attribute {:?} missing on {name:?}", def.name),
                );
            }
        }
    }
    for (attr, value) in idrefs {
        if !ids.contains_key(value) {
            report.push(Some(attr), format!("IDREF {value:?} does not match any ID"));
        }
    }
    report
}

/// Conformance plus the root bearing the DTD's root element name.
pub fn strictly_conforms(doc: &Document, d: &Dtd) -> Conformance {
    let mut report = conforms(doc, d);
    let root_label = doc.label(doc.root()).unwrap_or_default();
    if root_label != d.root() {
        report.push(
            Some(doc.root()),
            format!("root element is {root_label:?}, expected {:?}", d.root()),
        );
    }
    report
}
