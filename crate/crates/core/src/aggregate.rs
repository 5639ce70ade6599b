//! Aggregation over matched nodes, grouped by the lowest projected query
//! ancestor, with HAVING-style constraints.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;

use crate::eval::{assemble_output, match_table, retrieval_matching, Matching, OutputSet};
use crate::query::{AbstractQuery, AggFn, QNodeId};
use crate::xml::{AttrType, Document, DocumentBuilder, NodeId, XmlError};

/// Label of the element carrying aggregate values in results.
pub const AGG_ELEMENT: &str = "equix-agg";

/// The grouping node of `nq`: its lowest proper ancestor that is projected
/// or lies above a projected node, or the root when there is none.
pub fn grouping_node(q: &AbstractQuery, nq: QNodeId) -> QNodeId {
    let closure = q.output_closure();
    q.ancestors(nq)
        .into_iter()
        .find(|a| closure[a.index()])
        .unwrap_or(q.root())
}

#[derive(Debug, Clone, PartialEq)]
pub enum AggResult {
    Number(f64),
    Text(String),
    Undefined,
}

impl fmt::Display for AggResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AggResult::Number(n) if n.fract() == 0.0 && n.abs() < 1e15 => write!(f, "{}", *n as i64),
            AggResult::Number(n) => write!(f, "{n}"),
            AggResult::Text(s) => f.write_str(s),
            AggResult::Undefined => f.write_str("undefined"),
        }
    }
}

/// One aggregate of one query node within one group.
#[derive(Debug, Clone, PartialEq)]
pub struct AggValue {
    pub func: AggFn,
    pub target: QNodeId,
    pub label: String,
    pub group: NodeId,
    pub value: AggResult,
    /// Requested for output (as opposed to needed only by a constraint).
    pub shown: bool,
}

/// Decimal number with optional sign and fraction.
pub fn parse_decimal(s: &str) -> Option<f64> {
    let t = s.trim();
    let body = t.strip_prefix(['+', '-']).unwrap_or(t);
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    let digits = |p: &str| p.chars().all(|c| c.is_ascii_digit());
    if int.is_empty() && frac.is_empty() || !digits(int) || !digits(frac) {
        return None;
    }
    if body.ends_with('.') && int.is_empty() {
        return None;
    }
    t.parse().ok()
}

/// Applies `f` to a multiset of textual values.
pub fn apply(f: AggFn, values: &[String]) -> AggResult {
    let nums: Option<Vec<f64>> = values.iter().map(|v| parse_decimal(v)).collect();
    match f {
        AggFn::Count => AggResult::Number(values.len() as f64),
        AggFn::Min | AggFn::Max if values.is_empty() => AggResult::Undefined,
        AggFn::Min | AggFn::Max => {
            let pick = |o: Ordering| if f == AggFn::Min { o == Ordering::Less } else { o == Ordering::Greater };
            match nums {
                Some(ns) => AggResult::Number(ns.into_iter().reduce(|a, b| if pick(b.total_cmp(&a)) { b } else { a }).unwrap()),
                None => AggResult::Text(
                    values
                        .iter()
                        .cloned()
                        .reduce(|a, b| if pick(b.cmp(&a)) { b } else { a })
                        .unwrap(),
                ),
            }
        }
        AggFn::Sum => nums.map_or(AggResult::Undefined, |ns| AggResult::Number(ns.iter().sum())),
        AggFn::Avg => match nums {
            Some(ns) if !ns.is_empty() => AggResult::Number(ns.iter().sum::<f64>() / ns.len() as f64),
            _ => AggResult::Undefined,
        },
    }
}

/// Aggregates for every query node carrying aggregation functions or
/// constraints, one entry per function and group.
pub fn compute_aggregates(doc: &Document, q: &AbstractQuery, mu_r: &Matching) -> Vec<AggValue> {
    let mut out = Vec::new();
    for nq in q.node_ids() {
        let node = q.node(nq);
        if node.agg.is_empty() && node.agg_constraints.is_empty() {
            continue;
        }
        let mut funcs: Vec<AggFn> = node.agg.clone();
        for c in &node.agg_constraints {
            if !funcs.contains(&c.func) {
                funcs.push(c.func);
            }
        }
        let g_q = grouping_node(q, nq);
        for &g in mu_r.get(g_q) {
            let values: Vec<String> = mu_r
                .get(nq)
                .iter()
                .filter(|&&x| doc.is_ancestor(g, x))
                .map(|&x| doc.textual_content(x))
                .collect();
            for &f in &funcs {
                out.push(AggValue {
                    func: f,
                    target: nq,
                    label: node.label.clone(),
                    group: g,
                    value: apply(f, &values),
                    shown: node.agg.contains(&f),
                });
            }
        }
    }
    out
}

fn satisfies(v: &AggResult, cmp: crate::query::Comparator, bound: f64) -> bool {
    match v {
        AggResult::Number(n) => n.partial_cmp(&bound).is_some_and(|o| cmp.holds(o)),
        _ => false,
    }
}

/// Groups whose values meet every constraint of every constrained node.
pub fn check_agg_constraints(values: &[AggValue], q: &AbstractQuery) -> BTreeSet<NodeId> {
    let groups: BTreeSet<NodeId> = values.iter().map(|v| v.group).collect();
    let failing = failing_groups(values, q);
    groups.difference(&failing).copied().collect()
}

pub fn failing_groups(values: &[AggValue], q: &AbstractQuery) -> BTreeSet<NodeId> {
    let mut failing = BTreeSet::new();
    for v in values {
        let ok = q
            .node(v.target)
            .agg_constraints
            .iter()
            .filter(|c| c.func == v.func)
            .all(|c| satisfies(&v.value, c.cmp, c.value));
        if !ok {
            failing.insert(v.group);
        }
    }
    failing
}

/// Rebuilds `result` with an aggregate element appended under each group
/// node. `values` refer to node ids of `result`.
pub fn attach_aggregates(result: &Document, values: &[AggValue]) -> Result<Document, XmlError> {
    let mut b = DocumentBuilder::new();
    result.copy_into(result.root(), &mut b, &mut |n, b| {
        for v in values.iter().filter(|v| v.group == n && v.shown) {
            b.open(AGG_ELEMENT);
            b.attribute("fn", v.func.name(), AttrType::Cdata);
            b.attribute("of", &v.label, AttrType::Cdata);
            b.attribute("value", &v.value.to_string(), AttrType::Cdata);
            b.close();
        }
    });
    b.finish()
}

/// Evaluation with aggregation: groups failing a constraint lose their
/// output nodes, and surviving groups receive their aggregate values.
#[derive(Debug, Clone)]
pub struct AggregatedEvaluation {
    pub output: OutputSet,
    pub values: Vec<AggValue>,
    pub passing: BTreeSet<NodeId>,
    pub document: Option<Document>,
}

pub fn evaluate_aggregated(doc: &Document, q: &AbstractQuery) -> AggregatedEvaluation {
    let array = match_table(doc, q);
    let mu_r = retrieval_matching(&array);
    let values = compute_aggregates(doc, q, &mu_r);
    let failing = failing_groups(&values, q);
    let passing = check_agg_constraints(&values, q);
    let output = assemble_output(doc, q, &array, |_, x| {
        !failing.iter().any(|&g| g == x || doc.is_ancestor(g, x))
    });
    let document = doc
        .project_with_map(&output.n_r)
        .expect("output sets are closed under ancestors")
        .map(|(projected, map)| {
            let moved: Vec<AggValue> = values
                .iter()
                .filter(|v| passing.contains(&v.group))
                .filter_map(|v| {
                    map[v.group.index()].map(|g| AggValue {
                        group: g,
                        ..v.clone()
                    })
                })
                .collect();
            attach_aggregates(&projected, &moved).expect("rebuilt result is well formed")
        });
    AggregatedEvaluation {
        output,
        values,
        passing,
        document,
    }
}
