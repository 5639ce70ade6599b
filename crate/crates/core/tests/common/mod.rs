//! Random instance generators and reference implementations shared by the
//! integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

use equix_core::dtd::{AttDef, ContentDef, Dtd, Presence};
use equix_core::eval::{Enumeration, Matching};
use equix_core::query::{
    AbstractQuery, ConcreteQueryNode, EdgeQuantifier, Mode, NodeOp, QNodeId, Quantifier,
    StringMatcher,
};
use equix_core::xml::{AttrType, Document, DocumentBuilder, NodeId};
use indexmap::IndexMap;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type TestRng = ChaCha8Rng;

pub fn rng(seed: u64) -> TestRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub const LABELS: [&str; 3] = ["a", "b", "c"];
pub const ATTR: &str = "k";
pub const WORDS: [&str; 4] = ["x", "y", "z", "w"];

fn word(rng: &mut TestRng) -> &'static str {
    WORDS.choose(rng).unwrap()
}

fn words(rng: &mut TestRng, max: usize) -> String {
    let n = rng.gen_range(1..=max);
    (0..n).map(|_| word(rng)).collect::<Vec<_>>().join(" ")
}

// ---------------------------------------------------------------------------
// Small unconstrained documents

/// Random document over [`LABELS`] with at most `max_nodes` nodes of any kind.
pub fn small_document(rng: &mut TestRng, max_nodes: usize) -> Document {
    let mut b = DocumentBuilder::new();
    let mut budget = max_nodes - 1;
    b.open(if rng.gen_bool(0.85) { "a" } else { "b" });
    grow(rng, &mut b, &mut budget, 0);
    b.close();
    b.finish().unwrap()
}

fn grow(rng: &mut TestRng, b: &mut DocumentBuilder, budget: &mut usize, depth: usize) {
    if *budget >= 2 && rng.gen_bool(0.2) {
        b.attribute(ATTR, &words(rng, 2), AttrType::Cdata);
        *budget -= 2;
    }
    if *budget >= 1 && rng.gen_bool(0.35) {
        b.text(&words(rng, 3));
        *budget -= 1;
    }
    if depth >= 4 {
        return;
    }
    let kids = rng.gen_range(0..=3);
    for _ in 0..kids {
        if *budget == 0 {
            break;
        }
        *budget -= 1;
        b.open(LABELS.choose(rng).unwrap());
        grow(rng, b, budget, depth + 1);
        b.close();
    }
}

// ---------------------------------------------------------------------------
// Matchers and queries

pub fn matcher(rng: &mut TestRng, depth: usize) -> StringMatcher {
    let pick = if depth == 0 { rng.gen_range(0..7) } else { rng.gen_range(0..10) };
    match pick {
        0..=3 => StringMatcher::True,
        4 | 5 => StringMatcher::word(word(rng)),
        6 => StringMatcher::phrase(&format!("{} {}", word(rng), word(rng))),
        7 => matcher(rng, depth - 1).complement(),
        8 => StringMatcher::And(vec![matcher(rng, depth - 1), matcher(rng, depth - 1)]),
        _ => StringMatcher::Or(vec![matcher(rng, depth - 1), matcher(rng, depth - 1)]),
    }
}

fn op(rng: &mut TestRng) -> NodeOp {
    if rng.gen_bool(0.5) {
        NodeOp::And
    } else {
        NodeOp::Or
    }
}

fn edge(rng: &mut TestRng) -> EdgeQuantifier {
    if rng.gen_bool(0.5) {
        EdgeQuantifier::Exists
    } else {
        EdgeQuantifier::Forall
    }
}

/// Random abstract query with up to `max_nodes` nodes over [`LABELS`] and
/// the attribute label.
pub fn small_query(rng: &mut TestRng, max_nodes: usize, mode: Mode) -> AbstractQuery {
    let root = if rng.gen_bool(0.9) { "a" } else { "b" };
    let m = if rng.gen_bool(0.6) { StringMatcher::True } else { matcher(rng, 1) };
    let mut q = AbstractQuery::with_root(root, m, op(rng));
    q.mode = mode;
    let n = rng.gen_range(1..=max_nodes);
    for _ in 1..n {
        let parents: Vec<QNodeId> = q.node_ids().filter(|&p| q.label(p) != ATTR).collect();
        let p = *parents.choose(rng).unwrap();
        let label = if rng.gen_bool(0.2) { ATTR } else { LABELS.choose(rng).unwrap() };
        let (e, o) = (edge(rng), op(rng));
        let m = if rng.gen_bool(0.4) { StringMatcher::True } else { matcher(rng, 1) };
        q.add_child(p, e, label, m, o);
    }
    for id in q.node_ids().collect::<Vec<_>>() {
        if rng.gen_bool(0.35) {
            q.set_output(id, true);
        }
    }
    if q.output_nodes().is_empty() && rng.gen_bool(0.8) {
        let id = QNodeId(rng.gen_range(0..q.len()));
        q.set_output(id, true);
    }
    q
}

/// Random concrete query of nesting depth at most `depth` below the root.
pub fn concrete_query(rng: &mut TestRng, depth: usize) -> ConcreteQueryNode {
    let root = if rng.gen_bool(0.9) { "a" } else { "b" };
    let mut n = ConcreteQueryNode::new(root).matcher(matcher(rng, 1));
    add_concrete_children(rng, &mut n, depth);
    n
}

fn add_concrete_children(rng: &mut TestRng, n: &mut ConcreteQueryNode, depth: usize) {
    if depth == 0 || n.label == ATTR {
        return;
    }
    for _ in 0..rng.gen_range(0..=2) {
        let label = if rng.gen_bool(0.2) { ATTR } else { LABELS.choose(rng).unwrap() };
        let mut c = ConcreteQueryNode::new(label)
            .matcher(matcher(rng, 1))
            .quantifier(*Quantifier::ALL.choose(rng).unwrap());
        c.output = rng.gen_bool(0.3);
        add_concrete_children(rng, &mut c, depth - 1);
        n.children.push(c);
    }
}

// ---------------------------------------------------------------------------
// Reference semantics

/// Direct reading of a concrete query: negated quantifiers are the outer
/// negation of their positive form.
pub fn concrete_holds(doc: &Document, cq: &ConcreteQueryNode, x: NodeId) -> bool {
    if !cq.matcher.eval(&doc.textual_content(x)) {
        return false;
    }
    cq.children.iter().all(|c| {
        let mut kids = doc
            .children(x)
            .iter()
            .copied()
            .filter(|&y| doc.label(y) == Some(c.label.as_str()));
        match c.quantifier {
            Quantifier::Exists => kids.any(|y| concrete_holds(doc, c, y)),
            Quantifier::NotExists => !kids.any(|y| concrete_holds(doc, c, y)),
            Quantifier::Forall => kids.all(|y| concrete_holds(doc, c, y)),
            Quantifier::NotForall => !kids.all(|y| concrete_holds(doc, c, y)),
        }
    })
}

pub fn concrete_satisfied(doc: &Document, cq: &ConcreteQueryNode) -> bool {
    doc.label(doc.root()) == Some(cq.label.as_str()) && concrete_holds(doc, cq, doc.root())
}

/// Output images of all matchings plus their ancestors and descendants.
pub fn output_from_matchings(doc: &Document, q: &AbstractQuery, ms: &[Matching]) -> BTreeSet<NodeId> {
    let mut out = BTreeSet::new();
    for m in ms {
        for o in q.output_nodes() {
            for &x in m.get(o) {
                out.insert(x);
                out.extend(doc.ancestors(x));
                out.extend(doc.descendants(x));
            }
        }
    }
    out
}

pub fn output_images(q: &AbstractQuery, ms: &[Matching]) -> BTreeSet<NodeId> {
    ms.iter()
        .flat_map(|m| q.output_nodes().into_iter().flat_map(move |o| m.get(o).iter().copied()))
        .collect()
}

pub fn enumeration_ok(e: &Enumeration) -> bool {
    !e.truncated
}

/// Grouping node by walking up from `nq` and testing each ancestor against
/// the output nodes directly.
pub fn grouping_by_definition(q: &AbstractQuery, nq: QNodeId) -> QNodeId {
    let outputs = q.output_nodes();
    let above_output = |a: QNodeId| {
        outputs.iter().any(|&o| {
            let mut cur = q.parent(o);
            while let Some(p) = cur {
                if p == a {
                    return true;
                }
                cur = q.parent(p);
            }
            false
        })
    };
    let mut cur = q.parent(nq);
    while let Some(a) = cur {
        if outputs.contains(&a) || above_output(a) {
            return a;
        }
        cur = q.parent(a);
    }
    q.root()
}

// ---------------------------------------------------------------------------
// Language membership by derivatives

#[derive(Debug, Clone, PartialEq)]
pub enum Re {
    Null,
    Eps,
    Sym(String),
    Cat(Box<Re>, Box<Re>),
    Alt(Box<Re>, Box<Re>),
    Star(Box<Re>),
}

fn cat(a: Re, b: Re) -> Re {
    match (&a, &b) {
        (Re::Null, _) | (_, Re::Null) => Re::Null,
        (Re::Eps, _) => b,
        (_, Re::Eps) => a,
        _ => Re::Cat(Box::new(a), Box::new(b)),
    }
}

fn alt(a: Re, b: Re) -> Re {
    match (&a, &b) {
        (Re::Null, _) => b,
        (_, Re::Null) => a,
        _ if a == b => a,
        _ => Re::Alt(Box::new(a), Box::new(b)),
    }
}

/// Element-content expression as a regular expression; the empty marker,
/// EMPTY and #PCDATA all denote the empty word.
pub fn to_re(cd: &ContentDef) -> Re {
    match cd {
        ContentDef::Element(n) => Re::Sym(n.clone()),
        ContentDef::EmptySym | ContentDef::Empty | ContentDef::Pcdata => Re::Eps,
        ContentDef::Seq(xs) => xs.iter().map(to_re).fold(Re::Eps, cat),
        ContentDef::Choice(xs) => xs.iter().map(to_re).fold(Re::Null, alt),
        ContentDef::Opt(x) => alt(to_re(x), Re::Eps),
        ContentDef::Star(x) => Re::Star(Box::new(to_re(x))),
        ContentDef::Plus(x) => {
            let r = to_re(x);
            cat(r.clone(), Re::Star(Box::new(r)))
        }
        ContentDef::Any | ContentDef::Mixed(_) => panic!("not an element-content expression"),
    }
}

pub fn nullable(r: &Re) -> bool {
    match r {
        Re::Null | Re::Sym(_) => false,
        Re::Eps | Re::Star(_) => true,
        Re::Cat(a, b) => nullable(a) && nullable(b),
        Re::Alt(a, b) => nullable(a) || nullable(b),
    }
}

pub fn deriv(r: &Re, s: &str) -> Re {
    match r {
        Re::Null | Re::Eps => Re::Null,
        Re::Sym(n) => {
            if n == s {
                Re::Eps
            } else {
                Re::Null
            }
        }
        Re::Cat(a, b) => {
            let left = cat(deriv(a, s), (**b).clone());
            if nullable(a) {
                alt(left, deriv(b, s))
            } else {
                left
            }
        }
        Re::Alt(a, b) => alt(deriv(a, s), deriv(b, s)),
        Re::Star(a) => cat(deriv(a, s), r.clone()),
    }
}

pub fn member<S: AsRef<str>>(cd: &ContentDef, word: &[S]) -> bool {
    let mut r = to_re(cd);
    for s in word {
        r = deriv(&r, s.as_ref());
    }
    nullable(&r)
}

/// All words over `alphabet` up to length `max_len`.
pub fn all_words(alphabet: &[&str], max_len: usize) -> Vec<Vec<String>> {
    let mut out = vec![Vec::new()];
    let mut frontier = vec![Vec::<String>::new()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for w in &frontier {
            for a in alphabet {
                let mut w2 = w.clone();
                w2.push(a.to_string());
                next.push(w2);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

/// Every expression of depth at most `depth` over `names` and the empty
/// marker, with binary sequences and choices.
pub fn all_expressions(names: &[&str], depth: usize) -> Vec<ContentDef> {
    let mut leaves: Vec<ContentDef> = names.iter().map(|n| ContentDef::element(n)).collect();
    leaves.push(ContentDef::EmptySym);
    let mut levels = leaves.clone();
    for _ in 1..depth {
        let prev = levels.clone();
        let mut next = leaves.clone();
        for x in &prev {
            next.push(ContentDef::opt(x.clone()));
            next.push(ContentDef::star(x.clone()));
            next.push(ContentDef::plus(x.clone()));
        }
        for x in &prev {
            for y in &prev {
                next.push(ContentDef::Seq(vec![x.clone(), y.clone()]));
                next.push(ContentDef::Choice(vec![x.clone(), y.clone()]));
            }
        }
        levels = next;
    }
    levels
}

/// Random expression with n-ary operators and the empty marker.
pub fn random_expression(rng: &mut TestRng, names: &[&str], depth: usize) -> ContentDef {
    if depth == 0 || rng.gen_bool(0.25) {
        return if rng.gen_bool(0.2) {
            ContentDef::EmptySym
        } else {
            ContentDef::element(names.choose(rng).unwrap())
        };
    }
    match rng.gen_range(0..5) {
        0 => ContentDef::opt(random_expression(rng, names, depth - 1)),
        1 => ContentDef::star(random_expression(rng, names, depth - 1)),
        2 => ContentDef::plus(random_expression(rng, names, depth - 1)),
        k => {
            let n = rng.gen_range(2..=4);
            let xs = (0..n).map(|_| random_expression(rng, names, depth - 1)).collect();
            if k == 3 {
                ContentDef::Seq(xs)
            } else {
                ContentDef::Choice(xs)
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Random DTDs with conforming documents

/// Acyclic DTD over `e0..e{n-1}` rooted at `e0`: each element refers only
/// to higher-numbered ones.
pub fn random_dtd(rng: &mut TestRng, n: usize) -> Dtd {
    let names: Vec<String> = (0..n).map(|i| format!("e{i}")).collect();
    let mut elements = IndexMap::new();
    let mut attlists = IndexMap::new();
    for i in 0..n {
        let later: Vec<&str> = names[i + 1..].iter().map(String::as_str).collect();
        let cd = if later.is_empty() || (i > 0 && rng.gen_bool(0.25)) {
            if rng.gen_bool(0.6) {
                ContentDef::Pcdata
            } else {
                ContentDef::Empty
            }
        } else if rng.gen_bool(0.1) {
            let k = rng.gen_range(1..=later.len().min(2));
            ContentDef::Mixed(later.choose_multiple(rng, k).map(|s| s.to_string()).collect())
        } else {
            random_content(rng, &later, 2)
        };
        elements.insert(names[i].clone(), cd);
        let mut atts = Vec::new();
        if rng.gen_bool(0.4) {
            let presence = if rng.gen_bool(0.5) { Presence::Required } else { Presence::Implied };
            atts.push(AttDef { name: "k".into(), ty: AttrType::Cdata, presence });
        }
        if rng.gen_bool(0.25) {
            atts.push(AttDef { name: "id".into(), ty: AttrType::Id, presence: Presence::Required });
        }
        if rng.gen_bool(0.25) {
            atts.push(AttDef { name: "ref".into(), ty: AttrType::IdRef, presence: Presence::Implied });
        }
        if !atts.is_empty() {
            attlists.insert(names[i].clone(), atts);
        }
    }
    Dtd::new("e0", elements, attlists).unwrap()
}

fn random_content(rng: &mut TestRng, names: &[&str], depth: usize) -> ContentDef {
    if depth == 0 || rng.gen_bool(0.3) {
        let leaf = ContentDef::element(names.choose(rng).unwrap());
        return match rng.gen_range(0..5) {
            0 => ContentDef::opt(leaf),
            1 => ContentDef::star(leaf),
            2 => ContentDef::plus(leaf),
            _ => leaf,
        };
    }
    let k = rng.gen_range(2..=3);
    let xs: Vec<ContentDef> = (0..k).map(|_| random_content(rng, names, depth - 1)).collect();
    let group = if rng.gen_bool(0.6) { ContentDef::Seq(xs) } else { ContentDef::Choice(xs) };
    match rng.gen_range(0..6) {
        0 => ContentDef::opt(group),
        1 => ContentDef::star(group),
        2 => ContentDef::plus(group),
        _ => group,
    }
}

/// Random word of the language of an element-content expression.
fn sample(rng: &mut TestRng, cd: &ContentDef, out: &mut Vec<String>) {
    match cd {
        ContentDef::Element(n) => out.push(n.clone()),
        ContentDef::Seq(xs) => xs.iter().for_each(|x| sample(rng, x, out)),
        ContentDef::Choice(xs) => {
            let x = xs.choose(rng).unwrap();
            sample(rng, x, out)
        }
        ContentDef::Opt(x) => {
            if rng.gen_bool(0.6) {
                sample(rng, x, out)
            }
        }
        ContentDef::Star(x) => (0..rng.gen_range(0..=2)).for_each(|_| sample(rng, x, out)),
        ContentDef::Plus(x) => (0..rng.gen_range(1..=2)).for_each(|_| sample(rng, x, out)),
        _ => {}
    }
}

/// Random document strictly conforming to `d` (which must be acyclic).
pub fn conforming_document(rng: &mut TestRng, d: &Dtd) -> Document {
    let mut b = DocumentBuilder::new();
    let mut ids = Vec::new();
    emit(rng, d, d.root(), &mut b, &mut ids);
    b.finish().unwrap()
}

fn emit(rng: &mut TestRng, d: &Dtd, e: &str, b: &mut DocumentBuilder, ids: &mut Vec<String>) {
    b.open(e);
    for a in d.attributes(e) {
        if a.presence == Presence::Implied && rng.gen_bool(0.5) {
            continue;
        }
        match a.ty {
            AttrType::Cdata => {
                b.attribute(&a.name, &words(rng, 2), AttrType::Cdata);
            }
            AttrType::Id => {
                let v = format!("i{}", ids.len());
                b.attribute(&a.name, &v, AttrType::Id);
                ids.push(v);
            }
            AttrType::IdRef => {
                if let Some(v) = ids.choose(rng).cloned() {
                    b.attribute(&a.name, &v, AttrType::IdRef);
                }
            }
        }
    }
    match d.content(e).unwrap() {
        ContentDef::Pcdata => {
            if rng.gen_bool(0.8) {
                b.text(&words(rng, 3));
            }
        }
        ContentDef::Empty => {}
        ContentDef::Mixed(ns) => {
            for _ in 0..rng.gen_range(0..=3) {
                if rng.gen_bool(0.4) {
                    b.text(&words(rng, 2));
                } else {
                    let n = ns.choose(rng).unwrap().clone();
                    emit(rng, d, &n, b, ids);
                }
            }
        }
        cd => {
            let mut kids = Vec::new();
            sample(rng, cd, &mut kids);
            for k in kids {
                emit(rng, d, &k, b, ids);
            }
        }
    }
    b.close();
}

/// Random concrete query built by expanding `d` from its root.
pub fn query_for_dtd(rng: &mut TestRng, d: &Dtd, depth: usize) -> ConcreteQueryNode {
    let mut root = ConcreteQueryNode::new(d.root());
    root.output = rng.gen_bool(0.1);
    expand(rng, d, &mut root, depth);
    if !any_output(&root) {
        let mut n = &mut root;
        while !n.children.is_empty() && rng.gen_bool(0.7) {
            let i = rng.gen_range(0..n.children.len());
            n = &mut n.children[i];
        }
        n.output = true;
    }
    root
}

fn any_output(n: &ConcreteQueryNode) -> bool {
    n.output || n.children.iter().any(any_output)
}

fn expand(rng: &mut TestRng, d: &Dtd, n: &mut ConcreteQueryNode, depth: usize) {
    if depth == 0 || d.content(&n.label).is_none() {
        return;
    }
    let mut options: Vec<String> = d.child_names(&n.label).into_iter().map(str::to_owned).collect();
    options.extend(d.attributes(&n.label).iter().map(|a| a.name.clone()));
    if options.is_empty() {
        return;
    }
    for _ in 0..rng.gen_range(0..=3) {
        let label = options.choose(rng).unwrap().clone();
        let m = if rng.gen_bool(0.6) { StringMatcher::True } else { matcher(rng, 1) };
        let mut c = ConcreteQueryNode::new(&label)
            .matcher(m)
            .quantifier(*Quantifier::ALL.choose(rng).unwrap());
        c.output = rng.gen_bool(0.35);
        expand(rng, d, &mut c, depth - 1);
        n.children.push(c);
    }
}

// ---------------------------------------------------------------------------
// Scaling family

/// Movie-style catalog document with roughly `target` nodes.
pub fn movie_catalog_document(rng: &mut TestRng, target: usize) -> Document {
    const DESCR: [&str; 6] = ["wild", "west", "town", "river", "train", "gold"];
    const ROLES: [&str; 4] = ["villain", "sheriff", "rancher", "engineer"];
    const NAMES: [&str; 4] = ["Robert Redford", "Jack Robinson", "Ann Lee", "Sam Hill"];
    let mut b = DocumentBuilder::new();
    b.open("movieInfo");
    let actors = (target / 60).max(2);
    let mut used = 1 + actors * 5;
    let mut m = 0;
    while used < target {
        b.open("movie");
        b.open("descr");
        let d: Vec<&str> = (0..6).map(|_| *DESCR.choose(rng).unwrap()).collect();
        b.text(&d.join(" "));
        b.close();
        b.open("title");
        b.text(&format!("Movie {m}"));
        b.close();
        used += 5;
        for _ in 0..rng.gen_range(1..=3) {
            b.open("character");
            b.attribute("role", ROLES.choose(rng).unwrap(), AttrType::Cdata);
            b.attribute("star", &format!("a{}", rng.gen_range(0..actors)), AttrType::IdRef);
            b.close();
            used += 5;
        }
        b.close();
        m += 1;
    }
    for i in 0..actors {
        b.open("actor");
        b.attribute("id", &format!("a{i}"), AttrType::Id);
        b.open("name");
        b.text(NAMES[i % NAMES.len()]);
        b.close();
        b.close();
    }
    b.close();
    b.finish().unwrap()
}

/// Ten-node query over the movie catalog shape.
pub fn ten_node_query() -> ConcreteQueryNode {
    ConcreteQueryNode::new("movieInfo")
        .child(
            ConcreteQueryNode::new("movie")
                .matcher(StringMatcher::And(vec![StringMatcher::word("wild"), StringMatcher::word("west")]))
                .child(ConcreteQueryNode::new("descr").output())
                .child(ConcreteQueryNode::new("title").output())
                .child(
                    ConcreteQueryNode::new("character")
                        .quantifier(Quantifier::NotExists)
                        .child(ConcreteQueryNode::new("role").matcher(StringMatcher::word("villain")))
                        .child(ConcreteQueryNode::new("star").matcher(StringMatcher::word("redford"))),
                ),
        )
        .child(
            ConcreteQueryNode::new("actor")
                .child(ConcreteQueryNode::new("id"))
                .child(ConcreteQueryNode::new("name").matcher(StringMatcher::word("robinson")).output()),
        )
}

/// Least-squares slope and coefficient of determination.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, r2)
}

/// Seconds per call of `f`, as the best of several timed batches.
pub fn time_per_call<F: FnMut()>(mut f: F) -> f64 {
    let mut reps = 1usize;
    loop {
        let t = std::time::Instant::now();
        for _ in 0..reps {
            f();
        }
        if t.elapsed().as_secs_f64() > 0.05 || reps > 1 << 20 {
            break;
        }
        reps *= 2;
    }
    (0..9)
        .map(|_| {
            let t = std::time::Instant::now();
            for _ in 0..reps {
                f();
            }
            t.elapsed().as_secs_f64() / reps as f64
        })
        .fold(f64::INFINITY, f64::min)
}
