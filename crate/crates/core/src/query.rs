//! Concrete and abstract queries, string matchers and the translation that
//! pushes negated quantifiers down into node operators and edge quantifiers.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dtd::Dtd;
use crate::xml::Document;

// ---------------------------------------------------------------------------
// String matchers

/// Boolean expression over the words of a string.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
#[derive(Default)]
pub enum StringMatcher {
    #[default]
    True,
    Word(String),
    Phrase(String),
    And(Vec<StringMatcher>),
    Or(Vec<StringMatcher>),
    Not(Box<StringMatcher>),
}


/// Lower-cased whitespace tokens with surrounding punctuation removed.
pub fn tokenize(s: &str) -> Vec<String> {
    s.split_whitespace()
        .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase())
        .filter(|w| !w.is_empty())
        .collect()
}

fn contains_run(haystack: &[String], needle: &[String]) -> bool {
    needle.is_empty() || haystack.windows(needle.len()).any(|w| w == needle)
}

impl StringMatcher {
    pub fn word(w: &str) -> Self {
        StringMatcher::Word(w.to_owned())
    }

    pub fn phrase(p: &str) -> Self {
        StringMatcher::Phrase(p.to_owned())
    }

    pub fn is_true(&self) -> bool {
        matches!(self, StringMatcher::True)
    }

    pub fn eval(&self, s: &str) -> bool {
        if self.is_true() {
            return true;
        }
        self.eval_tokens(&tokenize(s))
    }

    /// Evaluation against an already tokenized string.
    pub fn eval_tokens(&self, tokens: &[String]) -> bool {
        match self {
            StringMatcher::True => true,
            StringMatcher::Word(w) | StringMatcher::Phrase(w) => contains_run(tokens, &tokenize(w)),
            StringMatcher::And(xs) => xs.iter().all(|x| x.eval_tokens(tokens)),
            StringMatcher::Or(xs) => xs.iter().any(|x| x.eval_tokens(tokens)),
            StringMatcher::Not(x) => !x.eval_tokens(tokens),
        }
    }

    /// Negation that never builds a double negation, so applying it twice
    /// gives back any matcher built through it.
    pub fn complement(&self) -> Self {
        match self {
            StringMatcher::Not(inner) => (**inner).clone(),
            other => StringMatcher::Not(Box::new(other.clone())),
        }
    }

    pub fn size(&self) -> usize {
        match self {
            StringMatcher::And(xs) | StringMatcher::Or(xs) => {
                1 + xs.iter().map(StringMatcher::size).sum::<usize>()
            }
            StringMatcher::Not(x) => 1 + x.size(),
            _ => 1,
        }
    }
}

pub fn eval_matcher(m: &StringMatcher, s: &str) -> bool {
    m.eval(s)
}

pub fn complement(m: &StringMatcher) -> StringMatcher {
    m.complement()
}

impl fmt::Display for StringMatcher {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |f: &mut fmt::Formatter<'_>, xs: &[StringMatcher], sep: &str| {
            f.write_str("(")?;
            for (i, x) in xs.iter().enumerate() {
                if i > 0 {
                    f.write_str(sep)?;
                }
                write!(f, "{x}")?;
            }
            f.write_str(")")
        };
        match self {
            StringMatcher::True => f.write_str("true"),
            StringMatcher::Word(w) => write!(f, "{w}"),
            StringMatcher::Phrase(p) => write!(f, "\"{p}\""),
            StringMatcher::And(xs) => join(f, xs, " and "),
            StringMatcher::Or(xs) => join(f, xs, " or "),
            StringMatcher::Not(x) => write!(f, "not {x}"),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MatcherJson {
    op: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    value: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    args: Option<Vec<MatcherJson>>,
}

impl TryFrom<MatcherJson> for StringMatcher {
    type Error = String;

    fn try_from(j: MatcherJson) -> Result<Self, String> {
        let value = |v: Option<String>| v.ok_or_else(|| format!("matcher {:?} needs a value", j.op));
        let args = |a: Option<Vec<MatcherJson>>| -> Result<Vec<StringMatcher>, String> {
            a.unwrap_or_default().into_iter().map(StringMatcher::try_from).collect()
        };
        Ok(match j.op.as_str() {
            "true" => StringMatcher::True,
            "word" => StringMatcher::Word(value(j.value)?),
            "phrase" => StringMatcher::Phrase(value(j.value)?),
            "and" => StringMatcher::And(args(j.args)?),
            "or" => StringMatcher::Or(args(j.args)?),
            "not" => {
                let mut a = args(j.args)?;
                if a.len() != 1 {
                    return Err("matcher \"not\" takes exactly one argument".into());
                }
                a.pop().unwrap().complement()
            }
            other => return Err(format!("unknown matcher operator {other:?}")),
        })
    }
}

impl From<&StringMatcher> for MatcherJson {
    fn from(m: &StringMatcher) -> Self {
        let (op, value, args) = match m {
            StringMatcher::True => ("true", None, None),
            StringMatcher::Word(w) => ("word", Some(w.clone()), None),
            StringMatcher::Phrase(p) => ("phrase", Some(p.clone()), None),
            StringMatcher::And(xs) => ("and", None, Some(xs.iter().map(Into::into).collect())),
            StringMatcher::Or(xs) => ("or", None, Some(xs.iter().map(Into::into).collect())),
            StringMatcher::Not(x) => ("not", None, Some(vec![(&**x).into()])),
        };
        MatcherJson {
            op: op.into(),
            value,
            args,
        }
    }
}

impl Serialize for StringMatcher {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        MatcherJson::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for StringMatcher {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let j = MatcherJson::deserialize(d)?;
        StringMatcher::try_from(j).map_err(serde::de::Error::custom)
    }
}

// ---------------------------------------------------------------------------
// Concrete queries

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantifier {
    #[default]
    Exists,
    NotExists,
    Forall,
    NotForall,
}

impl Quantifier {
    pub const ALL: [Quantifier; 4] = [
        Quantifier::Exists,
        Quantifier::NotExists,
        Quantifier::Forall,
        Quantifier::NotForall,
    ];

    pub fn is_negated(self) -> bool {
        matches!(self, Quantifier::NotExists | Quantifier::NotForall)
    }

    pub fn base(self) -> EdgeQuantifier {
        match self {
            Quantifier::Exists | Quantifier::NotExists => EdgeQuantifier::Exists,
            Quantifier::Forall | Quantifier::NotForall => EdgeQuantifier::Forall,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggFn {
    Count,
    Min,
    Max,
    Sum,
    Avg,
}

impl AggFn {
    pub const ALL: [AggFn; 5] = [AggFn::Count, AggFn::Min, AggFn::Max, AggFn::Sum, AggFn::Avg];

    pub fn name(self) -> &'static str {
        match self {
            AggFn::Count => "count",
            AggFn::Min => "min",
            AggFn::Max => "max",
            AggFn::Sum => "sum",
            AggFn::Avg => "avg",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Comparator {
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = "!=")]
    Ne,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = ">")]
    Gt,
}

impl Comparator {
    pub const ALL: [Comparator; 6] = [
        Comparator::Lt,
        Comparator::Le,
        Comparator::Eq,
        Comparator::Ne,
        Comparator::Ge,
        Comparator::Gt,
    ];

    pub fn holds(self, ord: std::cmp::Ordering) -> bool {
        use std::cmp::Ordering::*;
        match self {
            Comparator::Lt => ord == Less,
            Comparator::Le => ord != Greater,
            Comparator::Eq => ord == Equal,
            Comparator::Ne => ord != Equal,
            Comparator::Ge => ord != Less,
            Comparator::Gt => ord == Greater,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
struct AggSpec {
    #[serde(rename = "fn")]
    func: AggFn,
}

/// One atom `f θ v` of an aggregation constraint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AggConstraint {
    #[serde(rename = "fn")]
    pub func: AggFn,
    pub cmp: Comparator,
    pub value: f64,
}

fn agg_to_json<S: serde::Serializer>(v: &[AggFn], s: S) -> Result<S::Ok, S::Error> {
    let specs: Vec<AggSpec> = v.iter().map(|&func| AggSpec { func }).collect();
    specs.serialize(s)
}

fn agg_from_json<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Vec<AggFn>, D::Error> {
    Ok(Vec::<AggSpec>::deserialize(d)?.into_iter().map(|a| a.func).collect())
}

/// A node of a query as the user builds it: every node is implicitly an
/// and-node, and the quantifier sits on the edge from the parent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConcreteQueryNode {
    #[serde(rename = "element")]
    pub label: String,
    #[serde(rename = "constraint", default)]
    pub matcher: StringMatcher,
    #[serde(default)]
    pub quantifier: Quantifier,
    #[serde(default)]
    pub output: bool,
    #[serde(default)]
    pub children: Vec<ConcreteQueryNode>,
    #[serde(
        default,
        skip_serializing_if = "Vec::is_empty",
        serialize_with = "agg_to_json",
        deserialize_with = "agg_from_json"
    )]
    pub agg: Vec<AggFn>,
    #[serde(rename = "aggConstraints", default, skip_serializing_if = "Vec::is_empty")]
    pub agg_constraints: Vec<AggConstraint>,
}

impl ConcreteQueryNode {
    pub fn new(label: &str) -> Self {
        ConcreteQueryNode {
            label: label.to_owned(),
            matcher: StringMatcher::True,
            quantifier: Quantifier::Exists,
            output: false,
            children: Vec::new(),
            agg: Vec::new(),
            agg_constraints: Vec::new(),
        }
    }

    pub fn matcher(mut self, m: StringMatcher) -> Self {
        self.matcher = m;
        self
    }

    pub fn quantifier(mut self, q: Quantifier) -> Self {
        self.quantifier = q;
        self
    }

    pub fn output(mut self) -> Self {
        self.output = true;
        self
    }

    pub fn child(mut self, c: ConcreteQueryNode) -> Self {
        self.children.push(c);
        self
    }

    pub fn aggregate(mut self, f: AggFn) -> Self {
        self.agg.push(f);
        self
    }

    pub fn constrain(mut self, func: AggFn, cmp: Comparator, value: f64) -> Self {
        self.agg_constraints.push(AggConstraint { func, cmp, value });
        self
    }

    pub fn size(&self) -> usize {
        1 + self.children.iter().map(ConcreteQueryNode::size).sum::<usize>()
    }

    pub fn depth(&self) -> usize {
        1 + self.children.iter().map(ConcreteQueryNode::depth).max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Child,
    Descendant,
}

/// Top-level interchange object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryRequest {
    pub catalog: String,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ontology: Option<Vec<String>>,
    pub query: ConcreteQueryNode,
}

#[derive(Debug, Error)]
pub enum QueryError {
    #[error("invalid query: {0}")]
    Schema(String),
}

impl From<serde_json::Error> for QueryError {
    fn from(e: serde_json::Error) -> Self {
        QueryError::Schema(e.to_string())
    }
}

/// Parses a query node, or the `query` member of a request wrapper.
pub fn parse_query(text: &str) -> Result<ConcreteQueryNode, QueryError> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    if value.get("query").is_some() && value.get("element").is_none() {
        Ok(serde_json::from_value::<QueryRequest>(value)?.query)
    } else {
        Ok(serde_json::from_value(value)?)
    }
}

pub fn serialize_query(cq: &ConcreteQueryNode) -> String {
    serde_json::to_string_pretty(cq).expect("query serializes")
}

pub fn parse_request(text: &str) -> Result<QueryRequest, QueryError> {
    Ok(serde_json::from_str(text)?)
}

pub fn serialize_request(r: &QueryRequest) -> String {
    serde_json::to_string_pretty(r).expect("request serializes")
}

// ---------------------------------------------------------------------------
// Abstract queries

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct QNodeId(pub usize);

impl QNodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for QNodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "q{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeOp {
    And,
    Or,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EdgeQuantifier {
    Exists,
    Forall,
}

impl EdgeQuantifier {
    pub fn flip(self) -> Self {
        match self {
            EdgeQuantifier::Exists => EdgeQuantifier::Forall,
            EdgeQuantifier::Forall => EdgeQuantifier::Exists,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryNode {
    pub label: String,
    pub matcher: StringMatcher,
    pub op: NodeOp,
    /// Quantifier of the edge from the parent; `None` at the root.
    pub edge: Option<EdgeQuantifier>,
    pub output: bool,
    pub parent: Option<QNodeId>,
    pub children: Vec<QNodeId>,
    pub depth: usize,
    pub agg: Vec<AggFn>,
    pub agg_constraints: Vec<AggConstraint>,
}

/// Query tree with node operators, edge quantifiers and an output set.
/// Parents always precede their children in id order.
#[derive(Debug, Clone, PartialEq)]
pub struct AbstractQuery {
    nodes: Vec<QueryNode>,
    pub mode: Mode,
    pub ontology: Option<Ontology>,
}

impl AbstractQuery {
    pub fn with_root(label: &str, matcher: StringMatcher, op: NodeOp) -> Self {
        AbstractQuery {
            nodes: vec![QueryNode {
                label: label.to_owned(),
                matcher,
                op,
                edge: None,
                output: false,
                parent: None,
                children: Vec::new(),
                depth: 0,
                agg: Vec::new(),
                agg_constraints: Vec::new(),
            }],
            mode: Mode::Child,
            ontology: None,
        }
    }

    pub fn add_child(
        &mut self,
        parent: QNodeId,
        edge: EdgeQuantifier,
        label: &str,
        matcher: StringMatcher,
        op: NodeOp,
    ) -> QNodeId {
        let id = QNodeId(self.nodes.len());
        let depth = self.nodes[parent.0].depth + 1;
        self.nodes.push(QueryNode {
            label: label.to_owned(),
            matcher,
            op,
            edge: Some(edge),
            output: false,
            parent: Some(parent),
            children: Vec::new(),
            depth,
            agg: Vec::new(),
            agg_constraints: Vec::new(),
        });
        self.nodes[parent.0].children.push(id);
        id
    }

    pub fn set_output(&mut self, n: QNodeId, output: bool) {
        self.nodes[n.0].output = output;
    }

    pub fn set_aggregation(&mut self, n: QNodeId, agg: Vec<AggFn>, constraints: Vec<AggConstraint>) {
        self.nodes[n.0].agg = agg;
        self.nodes[n.0].agg_constraints = constraints;
    }

    pub fn root(&self) -> QNodeId {
        QNodeId(0)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, n: QNodeId) -> &QueryNode {
        &self.nodes[n.0]
    }

    pub fn node_ids(&self) -> impl DoubleEndedIterator<Item = QNodeId> + ExactSizeIterator {
        (0..self.nodes.len()).map(QNodeId)
    }

    pub fn children(&self, n: QNodeId) -> &[QNodeId] {
        &self.nodes[n.0].children
    }

    pub fn parent(&self, n: QNodeId) -> Option<QNodeId> {
        self.nodes[n.0].parent
    }

    pub fn label(&self, n: QNodeId) -> &str {
        &self.nodes[n.0].label
    }

    pub fn is_leaf(&self, n: QNodeId) -> bool {
        self.nodes[n.0].children.is_empty()
    }

    /// The projected set O.
    pub fn output_nodes(&self) -> BTreeSet<QNodeId> {
        self.node_ids().filter(|&n| self.nodes[n.0].output).collect()
    }

    /// Root-to-node label sequence.
    pub fn path(&self, n: QNodeId) -> Vec<&str> {
        let mut out = vec![self.label(n)];
        let mut cur = n;
        while let Some(p) = self.parent(cur) {
            out.push(self.label(p));
            cur = p;
        }
        out.reverse();
        out
    }

    /// Strict ancestors, nearest first.
    pub fn ancestors(&self, n: QNodeId) -> Vec<QNodeId> {
        let mut out = Vec::new();
        let mut cur = n;
        while let Some(p) = self.parent(cur) {
            out.push(p);
            cur = p;
        }
        out
    }

    /// Node ids ordered by descending depth (ties by id).
    pub fn by_descending_depth(&self) -> Vec<QNodeId> {
        let mut ids: Vec<QNodeId> = self.node_ids().collect();
        ids.sort_by_key(|n| (std::cmp::Reverse(self.nodes[n.0].depth), n.0));
        ids
    }

    /// Nodes that are in O or a strict ancestor of a node in O.
    pub fn output_closure(&self) -> Vec<bool> {
        let mut mark = vec![false; self.nodes.len()];
        for n in self.node_ids().rev() {
            let node = &self.nodes[n.0];
            if node.output || node.children.iter().any(|c| mark[c.0]) {
                mark[n.0] = true;
            }
        }
        mark
    }

    pub fn has_aggregation(&self) -> bool {
        self.nodes
            .iter()
            .any(|n| !n.agg.is_empty() || !n.agg_constraints.is_empty())
    }
}

/// Pushes negated quantifiers down the tree. Under an odd number of
/// negations a node becomes an or-node with a complemented matcher, and each
/// edge takes the dual of its base quantifier.
pub fn translate(cq: &ConcreteQueryNode) -> AbstractQuery {
    let mut q = AbstractQuery::with_root(&cq.label, cq.matcher.clone(), NodeOp::And);
    let root = q.root();
    q.set_output(root, cq.output);
    q.set_aggregation(root, cq.agg.clone(), cq.agg_constraints.clone());
    for c in &cq.children {
        translate_child(&mut q, root, c, false);
    }
    q
}

fn translate_child(q: &mut AbstractQuery, parent: QNodeId, c: &ConcreteQueryNode, parent_neg: bool) {
    let neg = parent_neg ^ c.quantifier.is_negated();
    let base = c.quantifier.base();
    let (edge, op, matcher) = if neg {
        (base.flip(), NodeOp::Or, c.matcher.complement())
    } else {
        (base, NodeOp::And, c.matcher.clone())
    };
    let id = q.add_child(parent, edge, &c.label, matcher, op);
    q.set_output(id, c.output);
    q.set_aggregation(id, c.agg.clone(), c.agg_constraints.clone());
    for g in &c.children {
        translate_child(q, id, g, neg);
    }
}

/// Translation of a full request, carrying mode and ontology.
pub fn translate_request(r: &QueryRequest) -> AbstractQuery {
    let mut q = translate(&r.query);
    q.mode = r.mode;
    q.ontology = r.ontology.as_ref().map(|terms| Ontology::new(terms.iter().cloned()));
    q
}

// ---------------------------------------------------------------------------
// Validation and ontologies

/// Checks that the query could have been built by expanding `d`.
/// An empty list means the query is valid.
pub fn validate_query_against_dtd(cq: &ConcreteQueryNode, d: &Dtd) -> Vec<String> {
    let mut diags = Vec::new();
    if cq.label != d.root() {
        diags.push(format!(
            "query root {:?} does not match the root element {:?}",
            cq.label,
            d.root()
        ));
    }
    check_node(cq, &cq.label, d, &mut diags);
    diags
}

fn check_node(n: &ConcreteQueryNode, path: &str, d: &Dtd, diags: &mut Vec<String>) {
    if d.content(&n.label).is_none() {
        diags.push(format!("{path}: element {:?} is not declared", n.label));
        return;
    }
    let refs = d.child_names(&n.label);
    for c in &n.children {
        let child_path = format!("{path}/{}", c.label);
        let is_element = refs.contains(&c.label.as_str());
        let is_attribute = d.attribute(&n.label, &c.label).is_some();
        if !is_element && !is_attribute {
            diags.push(format!(
                "{child_path}: {:?} is neither a subelement nor an attribute of {:?}",
                c.label, n.label
            ));
        } else if is_attribute && !is_element {
            if !c.children.is_empty() {
                diags.push(format!("{child_path}: attribute {:?} cannot have children", c.label));
            }
        } else {
            check_node(c, &child_path, d, diags);
        }
    }
}

/// Set of well-known element and attribute names.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Ontology {
    terms: BTreeSet<String>,
}

impl Ontology {
    pub fn new<I, S>(terms: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Ontology {
            terms: terms.into_iter().map(Into::into).collect(),
        }
    }

    pub fn terms(&self) -> &BTreeSet<String> {
        &self.terms
    }

    pub fn contains(&self, term: &str) -> bool {
        self.terms.contains(term)
    }
}

/// True iff some element or attribute name of `doc` is an ontology term.
pub fn describable_by(doc: &Document, o: &Ontology) -> bool {
    doc.label_set().iter().any(|l| o.contains(l))
}
