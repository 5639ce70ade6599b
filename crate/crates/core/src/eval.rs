//! Query evaluation: the two-pass match table algorithm, the matching
//! semantics it implements, and an exhaustive search over matchings used to
//! cross-check it on small inputs.

use std::collections::BTreeSet;

use crate::query::{describable_by, AbstractQuery, EdgeQuantifier, Mode, NodeOp, QNodeId};
use crate::xml::{Document, NodeId, TextScratch};

/// Dense boolean table indexed by (query node, document node).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchArray {
    doc_len: usize,
    bits: Vec<bool>,
}

impl MatchArray {
    pub fn new(query_len: usize, doc_len: usize) -> Self {
        MatchArray {
            doc_len,
            bits: vec![false; query_len * doc_len],
        }
    }

    pub fn get(&self, q: QNodeId, x: NodeId) -> bool {
        self.bits[q.index() * self.doc_len + x.index()]
    }

    pub fn set(&mut self, q: QNodeId, x: NodeId, v: bool) {
        self.bits[q.index() * self.doc_len + x.index()] = v;
    }

    pub fn query_len(&self) -> usize {
        self.bits.len().checked_div(self.doc_len).unwrap_or(0)
    }

    /// Document nodes marked for `q`.
    pub fn row(&self, q: QNodeId) -> impl Iterator<Item = NodeId> + '_ {
        let start = q.index() * self.doc_len;
        self.bits[start..start + self.doc_len]
            .iter()
            .enumerate()
            .filter(|(_, b)| **b)
            .map(|(i, _)| NodeId(i))
    }
}

/// A function from query nodes to sets of document nodes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Matching {
    sets: Vec<BTreeSet<NodeId>>,
}

impl Matching {
    pub fn empty(query_len: usize) -> Self {
        Matching {
            sets: vec![BTreeSet::new(); query_len],
        }
    }

    pub fn from_sets(sets: Vec<BTreeSet<NodeId>>) -> Self {
        Matching { sets }
    }

    pub fn get(&self, q: QNodeId) -> &BTreeSet<NodeId> {
        &self.sets[q.index()]
    }

    pub fn set(&mut self, q: QNodeId, nodes: BTreeSet<NodeId>) {
        self.sets[q.index()] = nodes;
    }

    pub fn insert(&mut self, q: QNodeId, x: NodeId) {
        self.sets[q.index()].insert(x);
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.iter().all(BTreeSet::is_empty)
    }

    /// Pointwise containment.
    pub fn is_contained_in(&self, other: &Matching) -> bool {
        self.sets.len() == other.sets.len()
            && self.sets.iter().zip(&other.sets).all(|(a, b)| a.is_subset(b))
    }

    pub fn pairs(&self) -> impl Iterator<Item = (QNodeId, NodeId)> + '_ {
        self.sets
            .iter()
            .enumerate()
            .flat_map(|(q, s)| s.iter().map(move |&x| (QNodeId(q), x)))
    }
}

pub fn union_matchings(m1: &Matching, m2: &Matching) -> Matching {
    assert_eq!(m1.len(), m2.len(), "matchings of different queries");
    Matching {
        sets: m1
            .sets
            .iter()
            .zip(&m2.sets)
            .map(|(a, b)| a.union(b).copied().collect())
            .collect(),
    }
}

/// Output nodes, their ancestors and their descendants.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OutputSet {
    pub n_out: BTreeSet<NodeId>,
    pub n_anc: BTreeSet<NodeId>,
    pub n_desc: BTreeSet<NodeId>,
    pub n_r: BTreeSet<NodeId>,
}

impl OutputSet {
    pub fn is_empty(&self) -> bool {
        self.n_r.is_empty()
    }
}

/// Tokenized textual content, computed on first use.
pub struct TextCache<'d> {
    doc: &'d Document,
    scratch: TextScratch,
    tokens: Vec<Option<Vec<String>>>,
}

impl<'d> TextCache<'d> {
    pub fn new(doc: &'d Document) -> Self {
        TextCache {
            doc,
            scratch: TextScratch::new(doc),
            tokens: vec![None; doc.len()],
        }
    }

    pub fn tokens(&mut self, x: NodeId) -> &[String] {
        if self.tokens[x.index()].is_none() {
            let text = self.doc.textual_content_with(x, &mut self.scratch);
            self.tokens[x.index()] = Some(crate::query::tokenize(&text));
        }
        self.tokens[x.index()].as_deref().unwrap()
    }

    fn content_ok(&mut self, q: &AbstractQuery, nq: QNodeId, x: NodeId) -> bool {
        let m = &q.node(nq).matcher;
        m.is_true() || m.eval_tokens(self.tokens(x))
    }
}

pub fn node_matches(doc: &Document, x: NodeId, q: &AbstractQuery, nq: QNodeId) -> bool {
    doc.label(x) == Some(q.label(nq))
}

/// Document nodes reachable from `x` along one query edge: children, or
/// proper descendants in descendant mode, carrying `label`.
fn edge_targets<'a>(
    doc: &'a Document,
    mode: Mode,
    x: NodeId,
    label: &'a str,
) -> Box<dyn Iterator<Item = NodeId> + 'a> {
    match mode {
        Mode::Child => Box::new(
            doc.children(x)
                .iter()
                .copied()
                .filter(move |&c| doc.label(c) == Some(label)),
        ),
        Mode::Descendant => Box::new(
            doc.descendant_range(x)
                .filter(move |&c| doc.label(c) == Some(label)),
        ),
    }
}

/// Satisfaction of `nq` at `x`, given the table entries of every child of
/// `nq`.
pub fn matches_proc(
    doc: &Document,
    q: &AbstractQuery,
    nq: QNodeId,
    x: NodeId,
    array: &MatchArray,
    texts: &mut TextCache<'_>,
) -> bool {
    let node = q.node(nq);
    let tc = texts.content_ok(q, nq, x);
    if node.children.is_empty() {
        return tc;
    }
    let mut status = node.children.iter().map(|&m| {
        let mut targets = edge_targets(doc, q.mode, x, q.label(m));
        match q.node(m).edge.expect("child edge") {
            EdgeQuantifier::Exists => targets.any(|y| array.get(m, y)),
            EdgeQuantifier::Forall => targets.all(|y| array.get(m, y)),
        }
    });
    match node.op {
        NodeOp::Or => tc || status.any(|s| s),
        NodeOp::And => tc && status.all(|s| s),
    }
}

/// Document nodes eligible for each query node: equal label paths in child
/// mode, root-anchored label subsequences in descendant mode.
pub fn candidates(doc: &Document, q: &AbstractQuery) -> Vec<Vec<NodeId>> {
    let mut cands: Vec<Vec<NodeId>> = vec![Vec::new(); q.len()];
    if doc.is_empty() || q.is_empty() {
        return cands;
    }
    if node_matches(doc, doc.root(), q, q.root()) {
        cands[0] = vec![doc.root()];
    }
    let mut in_parent = vec![false; doc.len()];
    for nq in q.node_ids().skip(1) {
        let p = q.parent(nq).unwrap();
        let label = q.label(nq);
        let found: Vec<NodeId> = match q.mode {
            Mode::Child => cands[p.index()]
                .iter()
                .flat_map(|&x| doc.children(x).iter().copied())
                .filter(|&y| doc.label(y) == Some(label))
                .collect(),
            Mode::Descendant => {
                in_parent.iter_mut().for_each(|b| *b = false);
                for &x in &cands[p.index()] {
                    in_parent[x.index()] = true;
                }
                // below[y]: some proper ancestor of y is a parent candidate
                let mut below = vec![false; doc.len()];
                for y in doc.node_ids().skip(1) {
                    let py = doc.parent(y).unwrap();
                    below[y.index()] = in_parent[py.index()] || below[py.index()];
                }
                doc.node_ids()
                    .filter(|&y| below[y.index()] && doc.label(y) == Some(label))
                    .collect()
            }
        };
        cands[nq.index()] = found;
    }
    cands
}

/// Final match table together with the output set it induces.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub array: MatchArray,
    pub output: OutputSet,
}

/// Both passes of the match table algorithm. The returned table is the
/// retrieval function after pruning.
pub fn match_table(doc: &Document, q: &AbstractQuery) -> MatchArray {
    let mut array = MatchArray::new(q.len(), doc.len());
    let cands = candidates(doc, q);
    let mut texts = TextCache::new(doc);

    for nq in q.by_descending_depth() {
        for &x in &cands[nq.index()] {
            if matches_proc(doc, q, nq, x, &array, &mut texts) {
                array.set(nq, x, true);
            }
        }
    }

    let root_ok = cands[0].iter().any(|&x| array.get(q.root(), x));
    for nq in q.node_ids().skip(1) {
        let p = q.parent(nq).unwrap();
        for &x in &cands[nq.index()] {
            if !array.get(nq, x) {
                continue;
            }
            let supported = root_ok
                && match q.mode {
                    Mode::Child => array.get(p, doc.parent(x).unwrap()),
                    Mode::Descendant => {
                        let mut cur = doc.parent(x);
                        let mut hit = false;
                        while let Some(a) = cur {
                            if array.get(p, a) {
                                hit = true;
                                break;
                            }
                            cur = doc.parent(a);
                        }
                        hit
                    }
                };
            if !supported {
                array.set(nq, x, false);
            }
        }
    }
    array
}

/// Output set for the surviving table entries of output nodes; `keep`
/// can veto individual (query node, document node) pairs.
pub fn assemble_output<F>(doc: &Document, q: &AbstractQuery, array: &MatchArray, keep: F) -> OutputSet
where
    F: Fn(QNodeId, NodeId) -> bool,
{
    let mut out = vec![false; doc.len()];
    for nq in q.output_nodes() {
        for x in array.row(nq) {
            if keep(nq, x) {
                out[x.index()] = true;
            }
        }
    }
    let mut anc = vec![false; doc.len()];
    let mut desc = vec![false; doc.len()];
    for x in doc.node_ids() {
        if !out[x.index()] {
            continue;
        }
        let mut cur = doc.parent(x);
        while let Some(a) = cur {
            if anc[a.index()] {
                break;
            }
            anc[a.index()] = true;
            cur = doc.parent(a);
        }
        for d in doc.descendant_range(x) {
            desc[d.index()] = true;
        }
    }
    let collect = |v: &[bool]| -> BTreeSet<NodeId> {
        v.iter()
            .enumerate()
            .filter(|(_, b)| **b)
            .map(|(i, _)| NodeId(i))
            .collect()
    };
    let n_out = collect(&out);
    let n_anc = collect(&anc);
    let n_desc = collect(&desc);
    let n_r = n_out.iter().chain(&n_anc).chain(&n_desc).copied().collect();
    OutputSet {
        n_out,
        n_anc,
        n_desc,
        n_r,
    }
}

pub fn evaluate(doc: &Document, q: &AbstractQuery) -> Evaluation {
    let array = match_table(doc, q);
    let output = assemble_output(doc, q, &array, |_, _| true);
    Evaluation { array, output }
}

pub fn query_evaluate(doc: &Document, q: &AbstractQuery) -> OutputSet {
    evaluate(doc, q).output
}

pub fn retrieval_matching(array: &MatchArray) -> Matching {
    Matching {
        sets: (0..array.query_len())
            .map(|q| array.row(QNodeId(q)).collect())
            .collect(),
    }
}

/// The projected result document, absent when nothing is output.
pub fn evaluate_to_document(doc: &Document, q: &AbstractQuery) -> Option<Document> {
    let out = query_evaluate(doc, q);
    doc.project(&out.n_r).expect("output sets are closed under ancestors")
}

/// Evaluates `q` on every document, keeping non-empty results in order. In
/// descendant mode with an ontology only describable documents are queried.
pub fn evaluate_catalog(docs: &[Document], q: &AbstractQuery) -> Vec<Document> {
    docs.iter()
        .filter(|d| match (&q.mode, &q.ontology) {
            (Mode::Descendant, Some(o)) => describable_by(d, o),
            _ => true,
        })
        .filter_map(|d| evaluate_to_document(d, q))
        .collect()
}

// ---------------------------------------------------------------------------
// Matching semantics, checked directly

fn connected(doc: &Document, mode: Mode, x: NodeId, parent_image: &BTreeSet<NodeId>) -> bool {
    match mode {
        Mode::Child => doc.parent(x).is_some_and(|p| parent_image.contains(&p)),
        Mode::Descendant => doc.ancestors(x).iter().any(|a| parent_image.contains(a)),
    }
}

/// Roots match, labels agree, and every image is connected to an image of
/// the parent query node.
pub fn is_matching(doc: &Document, q: &AbstractQuery, mu: &Matching) -> bool {
    if mu.len() != q.len() || doc.is_empty() {
        return false;
    }
    if mu.get(q.root()) != &BTreeSet::from([doc.root()]) {
        return false;
    }
    mu.pairs().all(|(nq, x)| {
        node_matches(doc, x, q, nq)
            && q.parent(nq)
                .is_none_or(|p| connected(doc, q.mode, x, mu.get(p)))
    })
}

fn edge_satisfied(doc: &Document, q: &AbstractQuery, mu: &Matching, x: NodeId, m: QNodeId) -> bool {
    let label = q.label(m);
    let related: Vec<NodeId> = match q.mode {
        Mode::Child => doc.children(x).to_vec(),
        Mode::Descendant => doc.descendants(x).into_iter().collect(),
    };
    let mut matching = related.into_iter().filter(|&y| doc.label(y) == Some(label));
    match q.node(m).edge.expect("child edge") {
        EdgeQuantifier::Exists => matching.any(|y| mu.get(m).contains(&y)),
        EdgeQuantifier::Forall => matching.all(|y| mu.get(m).contains(&y)),
    }
}

/// Content, operator and quantifier conditions for one image.
fn image_satisfied(doc: &Document, q: &AbstractQuery, mu: &Matching, nq: QNodeId, x: NodeId) -> bool {
    let node = q.node(nq);
    let content = node.matcher.eval(&doc.textual_content(x));
    if node.children.is_empty() {
        return content;
    }
    let mut edges = node.children.iter().map(|&m| edge_satisfied(doc, q, mu, x, m));
    match node.op {
        NodeOp::Or => content || edges.any(|e| e),
        NodeOp::And => content && edges.all(|e| e),
    }
}

pub fn is_satisfying_matching(doc: &Document, q: &AbstractQuery, mu: &Matching) -> bool {
    is_matching(doc, q, mu) && mu.pairs().all(|(nq, x)| image_satisfied(doc, q, mu, nq, x))
}

/// Result of an exhaustive search over matchings.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Enumeration {
    pub matchings: Vec<Matching>,
    /// Set when the cap stopped the search early.
    pub truncated: bool,
}

fn preorder(q: &AbstractQuery) -> Vec<QNodeId> {
    let mut out = Vec::with_capacity(q.len());
    let mut stack = vec![q.root()];
    while let Some(n) = stack.pop() {
        out.push(n);
        stack.extend(q.children(n).iter().rev());
    }
    out
}

/// Upper bound (in bits) on the number of candidate assignments the
/// exhaustive search may visit.
pub fn search_space_bits(doc: &Document, q: &AbstractQuery) -> usize {
    if q.is_empty() || doc.is_empty() {
        return 0;
    }
    let mut pool: Vec<BTreeSet<NodeId>> = vec![BTreeSet::new(); q.len()];
    if node_matches(doc, doc.root(), q, q.root()) {
        pool[0].insert(doc.root());
    }
    for nq in preorder(q).into_iter().skip(1) {
        let p = q.parent(nq).unwrap();
        pool[nq.index()] = doc
            .node_ids()
            .filter(|&x| node_matches(doc, x, q, nq) && connected(doc, q.mode, x, &pool[p.index()]))
            .collect();
    }
    pool.iter().map(BTreeSet::len).sum()
}

/// Every satisfying matching, found by trying all subsets of connected,
/// label-matching candidates top-down. Stops after `cap` results.
pub fn enumerate_satisfying_matchings(doc: &Document, q: &AbstractQuery, cap: usize) -> Enumeration {
    let mut result = Enumeration::default();
    if q.is_empty() || doc.is_empty() || !node_matches(doc, doc.root(), q, q.root()) {
        return result;
    }
    let order = preorder(q);
    // last[i]: query nodes whose subtree is complete once order[i] is assigned
    let mut subtree_end = vec![0usize; q.len()];
    for (i, &n) in order.iter().enumerate().rev() {
        subtree_end[n.index()] = q
            .children(n)
            .iter()
            .map(|c| subtree_end[c.index()])
            .max()
            .unwrap_or(i);
    }
    let mut completes: Vec<Vec<QNodeId>> = vec![Vec::new(); order.len()];
    for &n in &order {
        completes[subtree_end[n.index()]].push(n);
    }
    let mut mu = Matching::empty(q.len());
    let mut search = Search {
        doc,
        q,
        order: &order,
        completes: &completes,
        cap,
        out: &mut result,
    };
    search.assign(0, &mut mu);
    result
}

struct Search<'a> {
    doc: &'a Document,
    q: &'a AbstractQuery,
    order: &'a [QNodeId],
    completes: &'a [Vec<QNodeId>],
    cap: usize,
    out: &'a mut Enumeration,
}

impl Search<'_> {
    fn assign(&mut self, i: usize, mu: &mut Matching) {
        if self.out.truncated {
            return;
        }
        if i == self.order.len() {
            if is_satisfying_matching(self.doc, self.q, mu) {
                if self.out.matchings.len() == self.cap {
                    self.out.truncated = true;
                } else {
                    self.out.matchings.push(mu.clone());
                }
            }
            return;
        }
        let nq = self.order[i];
        let pool: Vec<NodeId> = match self.q.parent(nq) {
            None => vec![self.doc.root()],
            Some(p) => self
                .doc
                .node_ids()
                .filter(|&x| {
                    node_matches(self.doc, x, self.q, nq)
                        && connected(self.doc, self.q.mode, x, mu.get(p))
                })
                .collect(),
        };
        assert!(pool.len() < 63, "candidate pool too large for exhaustive search");
        let subsets: u64 = if nq == self.q.root() { 1 } else { 1 << pool.len() };
        let start = if nq == self.q.root() { 1 } else { 0 };
        for bits in start..subsets.max(start + 1) {
            let chosen: BTreeSet<NodeId> = if nq == self.q.root() {
                pool.iter().copied().collect()
            } else {
                pool.iter()
                    .enumerate()
                    .filter(|(k, _)| bits >> k & 1 == 1)
                    .map(|(_, &x)| x)
                    .collect()
            };
            mu.set(nq, chosen);
            let complete_ok = self.completes[i].iter().all(|&n| {
                mu.get(n)
                    .iter()
                    .all(|&x| image_satisfied(self.doc, self.q, mu, n, x))
            });
            if complete_ok {
                self.assign(i + 1, mu);
            }
            if self.out.truncated {
                break;
            }
        }
        mu.set(nq, BTreeSet::new());
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{breadth_first_numbering, movie_document, sample_query};
    use crate::query::{translate, StringMatcher};
    use crate::xml::parse_document;

    fn fixture() -> (Document, AbstractQuery, Vec<NodeId>) {
        let doc = movie_document();
        let num = breadth_first_numbering(&doc);
        (doc, translate(&sample_query()), num)
    }

    fn qnode(q: &AbstractQuery, label: &str) -> QNodeId {
        q.node_ids().find(|&n| q.label(n) == label).unwrap()
    }

    #[test]
    fn label_matching() {
        let (doc, q, num) = fixture();
        assert!(node_matches(&doc, num[1], &q, qnode(&q, "movie")));
        assert!(!node_matches(&doc, num[4], &q, qnode(&q, "movie")));
        assert!(node_matches(&doc, num[29], &q, qnode(&q, "role")));
    }

    #[test]
    fn leaf_procedure_on_fixture() {
        let (doc, q, num) = fixture();
        let array = MatchArray::new(q.len(), doc.len());
        let mut texts = TextCache::new(&doc);
        // role under the negated character edge carries the complemented matcher
        assert!(matches_proc(&doc, &q, qnode(&q, "role"), num[29], &array, &mut texts));
        assert!(!matches_proc(&doc, &q, qnode(&q, "role"), num[21], &array, &mut texts));
    }

    #[test]
    fn vacuous_universal_and_disjunction() {
        let doc = parse_document("<a><b/></a>").unwrap();
        let mut q = AbstractQuery::with_root("a", StringMatcher::True, NodeOp::And);
        q.add_child(q.root(), EdgeQuantifier::Forall, "c", StringMatcher::word("x"), NodeOp::And);
        let array = MatchArray::new(q.len(), doc.len());
        let mut texts = TextCache::new(&doc);
        assert!(matches_proc(&doc, &q, q.root(), doc.root(), &array, &mut texts));

        let mut q2 = AbstractQuery::with_root("a", StringMatcher::word("nope"), NodeOp::Or);
        let b = q2.add_child(q2.root(), EdgeQuantifier::Exists, "b", StringMatcher::True, NodeOp::And);
        let mut array2 = MatchArray::new(q2.len(), doc.len());
        array2.set(b, NodeId(1), true);
        assert!(matches_proc(&doc, &q2, q2.root(), doc.root(), &array2, &mut texts));
    }

    #[test]
    fn sample_query_output() {
        let (doc, q, num) = fixture();
        let out = query_evaluate(&doc, &q);
        for k in [10, 11, 14, 15] {
            assert!(out.n_out.contains(&num[k]), "node {k}");
        }
        assert_eq!(out.n_out.len(), 4);
        for x in doc.descendant_range(num[1]) {
            assert!(!out.n_r.contains(&x));
        }
        assert!(!out.n_r.contains(&num[1]));
        let mu_r = retrieval_matching(&match_table(&doc, &q));
        let character = mu_r.get(qnode(&q, "character"));
        for k in [12, 13, 16] {
            assert!(character.contains(&num[k]));
        }
        assert!(!mu_r.get(qnode(&q, "movie")).contains(&num[1]));
        assert!(is_satisfying_matching(&doc, &q, &mu_r));
    }

    #[test]
    fn result_document_groups_by_movie() {
        let (doc, q, _) = fixture();
        let result = evaluate_to_document(&doc, &q).unwrap();
        let text = crate::xml::serialize_document(&result);
        assert_eq!(text.matches("<movie>").count(), 2);
        assert!(!text.contains("Dust and Iron"));
        assert!(!text.contains("<character"));
        assert!(!text.contains("<actor"));
    }

    #[test]
    fn trivial_queries() {
        let (doc, _, _) = fixture();
        let mut all = AbstractQuery::with_root("movieInfo", StringMatcher::True, NodeOp::And);
        all.set_output(all.root(), true);
        assert_eq!(query_evaluate(&doc, &all).n_r.len(), doc.len());
        assert_eq!(evaluate_to_document(&doc, &all).unwrap(), doc);

        let mut none = AbstractQuery::with_root("movieInfo", StringMatcher::word("zebra"), NodeOp::And);
        none.set_output(none.root(), true);
        assert!(query_evaluate(&doc, &none).is_empty());
        assert!(evaluate_to_document(&doc, &none).is_none());
    }

    fn sample_mu(q: &AbstractQuery, num: &[NodeId], rows: &[(&str, &[usize])]) -> Matching {
        let mut mu = Matching::empty(q.len());
        for (label, ks) in rows {
            mu.set(qnode(q, label), ks.iter().map(|&k| num[k]).collect());
        }
        mu
    }

    #[test]
    fn table_matchings_satisfy() {
        let (doc, q, num) = fixture();
        let mu1 = sample_mu(
            &q,
            &num,
            &[
                ("movieInfo", &[0]),
                ("movie", &[2]),
                ("descr", &[10]),
                ("title", &[11]),
                ("character", &[12, 13]),
                ("role", &[25, 27]),
                ("star", &[26, 28]),
                ("actor", &[4]),
            ],
        );
        let mu2 = sample_mu(
            &q,
            &num,
            &[
                ("movieInfo", &[0]),
                ("movie", &[3]),
                ("descr", &[14]),
                ("title", &[15]),
                ("character", &[16]),
                ("role", &[29]),
                ("star", &[30]),
                ("actor", &[5]),
            ],
        );
        assert!(is_satisfying_matching(&doc, &q, &mu1));
        assert!(is_satisfying_matching(&doc, &q, &mu2));
        let both = union_matchings(&mu1, &mu2);
        assert!(is_satisfying_matching(&doc, &q, &both));
        assert_eq!(union_matchings(&mu1, &mu1), mu1);
        assert_eq!(union_matchings(&mu1, &Matching::empty(q.len())), mu1);

        let mut broken = mu1.clone();
        broken.set(qnode(&q, "character"), BTreeSet::new());
        assert!(!is_satisfying_matching(&doc, &q, &broken));
        assert!(!is_satisfying_matching(&doc, &q, &Matching::empty(q.len())));

        let mu_r = retrieval_matching(&match_table(&doc, &q));
        assert!(mu1.is_contained_in(&mu_r) && mu2.is_contained_in(&mu_r));
    }

    #[test]
    fn enumeration_small_cases() {
        let doc = parse_document("<a/>").unwrap();
        let q = AbstractQuery::with_root("a", StringMatcher::True, NodeOp::And);
        let e = enumerate_satisfying_matchings(&doc, &q, 10);
        assert_eq!(e.matchings, vec![Matching::from_sets(vec![BTreeSet::from([NodeId(0)])])]);
        assert!(!e.truncated);

        let unsat = AbstractQuery::with_root("a", StringMatcher::word("x"), NodeOp::And);
        assert!(enumerate_satisfying_matchings(&doc, &unsat, 10).matchings.is_empty());

        let doc2 = parse_document("<a><b/><b/></a>").unwrap();
        let mut q2 = AbstractQuery::with_root("a", StringMatcher::True, NodeOp::And);
        q2.add_child(q2.root(), EdgeQuantifier::Exists, "b", StringMatcher::True, NodeOp::And);
        let e2 = enumerate_satisfying_matchings(&doc2, &q2, 10);
        assert_eq!(e2.matchings.len(), 3);
        let capped = enumerate_satisfying_matchings(&doc2, &q2, 2);
        assert!(capped.truncated);
        assert_eq!(capped.matchings.len(), 2);
    }

    #[test]
    fn descendant_mode_skips_levels() {
        let doc = parse_document("<r><m><w><t>gold</t></w></m></r>").unwrap();
        let mut q = AbstractQuery::with_root("r", StringMatcher::True, NodeOp::And);
        let m = q.add_child(q.root(), EdgeQuantifier::Exists, "m", StringMatcher::True, NodeOp::And);
        let t = q.add_child(m, EdgeQuantifier::Exists, "t", StringMatcher::word("gold"), NodeOp::And);
        q.set_output(t, true);
        assert!(query_evaluate(&doc, &q).is_empty());
        q.mode = Mode::Descendant;
        let out = query_evaluate(&doc, &q);
        assert_eq!(out.n_out.len(), 1);
        let mu_r = retrieval_matching(&match_table(&doc, &q));
        assert!(is_satisfying_matching(&doc, &q, &mu_r));
    }

    #[test]
    fn catalog_evaluation() {
        let (doc, q, _) = fixture();
        assert_eq!(evaluate_catalog(std::slice::from_ref(&doc), &q).len(), 1);
        assert!(evaluate_catalog(&[], &q).is_empty());
        let mut dq = q.clone();
        dq.mode = Mode::Descendant;
        dq.ontology = Some(crate::query::Ontology::new(["director"]));
        assert!(evaluate_catalog(&[doc], &dq).is_empty());
    }
}
