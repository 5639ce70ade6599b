//! DTDs for query results: which elements can appear, what content they may
//! have after projection, and rewriting away the empty marker.

use std::collections::{BTreeMap, BTreeSet};

use indexmap::IndexMap;

use crate::aggregate::{grouping_node, AGG_ELEMENT};
use crate::dtd::{AttDef, ContentDef, Dtd, DtdError, Presence};
use crate::query::{AbstractQuery, QNodeId};
use crate::xml::{AttrType, Document, NodeKind};

/// Element labels of output nodes; an output attribute contributes the
/// element of its parent query node.
fn output_seeds<'q>(q: &'q AbstractQuery, d: &Dtd) -> (BTreeSet<&'q str>, BTreeSet<&'q str>) {
    let mut elements = BTreeSet::new();
    let mut owners = BTreeSet::new();
    for o in q.output_nodes() {
        let label = q.label(o);
        if d.content(label).is_some() {
            elements.insert(label);
        } else if let Some(p) = q.parent(o) {
            owners.insert(q.label(p));
        }
    }
    (elements, owners)
}

/// Element names that may occur in a result: the root, output labels and
/// their ancestors and descendants in `d`.
pub fn result_element_names(q: &AbstractQuery, d: &Dtd) -> BTreeSet<String> {
    let (elements, owners) = output_seeds(q, d);
    let parents = d.parent_index();
    let mut names: BTreeSet<String> = BTreeSet::from([d.root().to_owned()]);
    names.extend(elements.iter().chain(&owners).map(|s| s.to_string()));
    names.extend(d.reach(elements.iter().copied(), |e| d.child_names(e)));
    names.extend(d.reach(elements.iter().chain(&owners).copied(), |e| {
        parents.get(e).cloned().unwrap_or_default()
    }));
    names
}

/// Replaces each element name through `f`.
pub fn substitute(cd: &ContentDef, f: &dyn Fn(&str) -> ContentDef) -> ContentDef {
    match cd {
        ContentDef::Element(n) => f(n),
        ContentDef::Mixed(ns) => {
            let kept: Vec<String> = ns
                .iter()
                .filter(|n| f(n) != ContentDef::EmptySym)
                .cloned()
                .collect();
            if kept.is_empty() {
                ContentDef::Pcdata
            } else {
                ContentDef::Mixed(kept)
            }
        }
        ContentDef::Seq(xs) => ContentDef::Seq(xs.iter().map(|x| substitute(x, f)).collect()),
        ContentDef::Choice(xs) => ContentDef::Choice(xs.iter().map(|x| substitute(x, f)).collect()),
        ContentDef::Opt(x) => ContentDef::opt(substitute(x, f)),
        ContentDef::Star(x) => ContentDef::star(substitute(x, f)),
        ContentDef::Plus(x) => ContentDef::plus(substitute(x, f)),
        other => other.clone(),
    }
}

fn is_atomic_kind(cd: &ContentDef) -> bool {
    matches!(
        cd,
        ContentDef::Pcdata | ContentDef::Empty | ContentDef::Any | ContentDef::Mixed(_)
    )
}

/// Alternatives that are all EMPTY, #PCDATA, mixed or ANY, merged into one.
fn merge_atomic(xs: &[ContentDef]) -> ContentDef {
    if xs.contains(&ContentDef::Any) {
        return ContentDef::Any;
    }
    let mut names: Vec<String> = Vec::new();
    let mut text = false;
    for x in xs {
        match x {
            ContentDef::Pcdata => text = true,
            ContentDef::Mixed(ns) => {
                text = true;
                for n in ns {
                    if !names.contains(n) {
                        names.push(n.clone());
                    }
                }
            }
            _ => {}
        }
    }
    match (text, names.is_empty()) {
        (false, _) => ContentDef::Empty,
        (true, true) => ContentDef::Pcdata,
        (true, false) => ContentDef::Mixed(names),
    }
}

fn simplify_inner(cd: &ContentDef) -> ContentDef {
    match cd {
        ContentDef::Seq(xs) => {
            let kept: Vec<ContentDef> = xs
                .iter()
                .map(simplify_inner)
                .filter(|x| *x != ContentDef::EmptySym)
                .collect();
            match kept.len() {
                0 => ContentDef::EmptySym,
                _ => ContentDef::seq(kept),
            }
        }
        ContentDef::Choice(xs) => {
            let all: Vec<ContentDef> = xs.iter().map(simplify_inner).collect();
            let had_empty = all.contains(&ContentDef::EmptySym);
            let mut kept: Vec<ContentDef> = Vec::new();
            for x in all {
                if x != ContentDef::EmptySym && !kept.contains(&x) {
                    kept.push(x);
                }
            }
            if kept.is_empty() {
                return ContentDef::EmptySym;
            }
            if kept.iter().all(is_atomic_kind) {
                return merge_atomic(&kept);
            }
            let body = ContentDef::choice(kept);
            if had_empty {
                wrap(ContentDef::opt, body)
            } else {
                body
            }
        }
        ContentDef::Opt(x) => wrap(ContentDef::opt, simplify_inner(x)),
        ContentDef::Star(x) => wrap(ContentDef::star, simplify_inner(x)),
        ContentDef::Plus(x) => wrap(ContentDef::plus, simplify_inner(x)),
        other => other.clone(),
    }
}

/// Applies a modifier, absorbing it into operands that have no modifier form.
fn wrap(f: fn(ContentDef) -> ContentDef, inner: ContentDef) -> ContentDef {
    if inner == ContentDef::EmptySym || is_atomic_kind(&inner) {
        inner
    } else {
        f(inner)
    }
}

/// Removes the empty marker: `(t,∅)` and `(∅,t)` become `t`, `(t|∅)` and
/// `(∅|t)` become `t?`, a modified `∅` is `∅`, and a whole expression that
/// reduces to `∅` is `EMPTY`.
pub fn simplify(cd: &ContentDef) -> ContentDef {
    match simplify_inner(cd) {
        ContentDef::EmptySym => ContentDef::Empty,
        other => other,
    }
}

/// Precomputed query facts shared by every content definition of one result
/// DTD.
struct Context<'a> {
    q: &'a AbstractQuery,
    d: &'a Dtd,
    closure: Vec<bool>,
    covered: BTreeSet<String>,
    by_label: BTreeMap<&'a str, Vec<QNodeId>>,
}

impl<'a> Context<'a> {
    fn new(q: &'a AbstractQuery, d: &'a Dtd) -> Self {
        let (elements, _) = output_seeds(q, d);
        let mut covered: BTreeSet<String> = elements.iter().map(|s| s.to_string()).collect();
        covered.extend(d.reach(elements.iter().copied(), |e| d.child_names(e)));
        let mut by_label: BTreeMap<&str, Vec<QNodeId>> = BTreeMap::new();
        for n in q.node_ids() {
            by_label.entry(q.label(n)).or_default().push(n);
        }
        Context {
            q,
            d,
            closure: q.output_closure(),
            covered,
            by_label,
        }
    }

    fn content_definition(&self, e: &str) -> ContentDef {
        let Some(phi_e) = self.d.content(e) else {
            return ContentDef::Empty;
        };
        // every substituted alternative accepts empty content, so an initial
        // empty marker would only add a redundant `?`
        let mut alternatives = Vec::new();
        if self.covered.contains(e) {
            alternatives.push(phi_e.clone());
        }
        // query nodes on one label path describe the same document elements,
        // so their kept children are pooled
        let mut groups: BTreeMap<Vec<&str>, BTreeSet<&str>> = BTreeMap::new();
        for &n in self.by_label.get(e).into_iter().flatten() {
            if !self.closure[n.index()] {
                continue;
            }
            let kept = groups.entry(self.q.path(n)).or_default();
            for &c in self.q.children(n) {
                if self.closure[c.index()] {
                    kept.insert(self.q.label(c));
                }
            }
        }
        for kept in groups.values() {
            let alt = substitute(phi_e, &|name| {
                if kept.contains(name) {
                    ContentDef::opt(ContentDef::element(name))
                } else {
                    ContentDef::EmptySym
                }
            });
            if !alternatives.contains(&alt) {
                alternatives.push(alt);
            }
        }
        if alternatives.is_empty() {
            return ContentDef::Empty;
        }
        simplify(&ContentDef::choice(alternatives))
    }
}

/// Content definition of `e` in the result DTD of `q`.
pub fn create_content_definition(e: &str, q: &AbstractQuery, d: &Dtd) -> ContentDef {
    Context::new(q, d).content_definition(e)
}

fn agg_attlist() -> Vec<AttDef> {
    ["fn", "of", "value"]
        .into_iter()
        .map(|name| AttDef {
            name: name.to_owned(),
            ty: AttrType::Cdata,
            presence: Presence::Implied,
        })
        .collect()
}

/// Content allowing trailing aggregate elements after `cd`.
pub fn with_aggregates(cd: ContentDef) -> ContentDef {
    let agg = ContentDef::element(AGG_ELEMENT);
    match cd {
        ContentDef::Empty => ContentDef::star(agg),
        ContentDef::Pcdata => ContentDef::Mixed(vec![AGG_ELEMENT.to_owned()]),
        ContentDef::Mixed(mut ns) => {
            ns.push(AGG_ELEMENT.to_owned());
            ContentDef::Mixed(ns)
        }
        ContentDef::Any => ContentDef::Any,
        other => ContentDef::Seq(vec![other, ContentDef::star(agg)]),
    }
}

fn implied(atts: &[AttDef]) -> Vec<AttDef> {
    atts.iter()
        .map(|a| AttDef {
            name: a.name.clone(),
            // a projected IDREF may lose its target
            ty: if a.ty == AttrType::IdRef { AttrType::Cdata } else { a.ty },
            presence: Presence::Implied,
        })
        .collect()
}

/// The result DTD of a child-mode query: every projected result of `q` over
/// a document strictly conforming to `d` strictly conforms to it.
pub fn create_result_dtd(q: &AbstractQuery, d: &Dtd) -> Result<Dtd, DtdError> {
    let ctx = Context::new(q, d);
    let names = result_element_names(q, d);
    let groups: BTreeSet<&str> = q
        .node_ids()
        .filter(|&n| !q.node(n).agg.is_empty())
        .map(|n| q.label(grouping_node(q, n)))
        .collect();
    let mut elements = IndexMap::new();
    let mut attlists = IndexMap::new();
    for e in d.elements().keys().filter(|e| names.contains(*e)) {
        let mut cd = ctx.content_definition(e);
        if groups.contains(e.as_str()) {
            cd = with_aggregates(cd);
        }
        elements.insert(e.clone(), cd);
        let atts = d.attributes(e);
        if !atts.is_empty() {
            attlists.insert(e.clone(), implied(atts));
        }
    }
    if !groups.is_empty() {
        elements.insert(AGG_ELEMENT.to_owned(), ContentDef::Empty);
        attlists.insert(AGG_ELEMENT.to_owned(), agg_attlist());
    }
    Dtd::new(d.root(), elements, attlists)
}

/// Permissive DTD for results of descendant-mode queries: every element
/// seen is `ANY` and every attribute seen is optional character data.
pub fn any_result_dtd(root: &str, results: &[Document]) -> Result<Dtd, DtdError> {
    let mut elements: IndexMap<String, ContentDef> = IndexMap::new();
    let mut attlists: IndexMap<String, Vec<AttDef>> = IndexMap::new();
    elements.insert(root.to_owned(), ContentDef::Any);
    for doc in results {
        for (id, node) in doc.nodes() {
            match node.kind {
                NodeKind::Element => {
                    elements.entry(node.value.clone()).or_insert(ContentDef::Any);
                }
                NodeKind::Attribute(_) => {
                    let owner = doc.label(doc.parent(id).unwrap()).unwrap().to_owned();
                    let list = attlists.entry(owner).or_default();
                    if !list.iter().any(|a| a.name == node.value) {
                        list.push(AttDef {
                            name: node.value.clone(),
                            ty: AttrType::Cdata,
                            presence: Presence::Implied,
                        });
                    }
                }
                NodeKind::Text => {}
            }
        }
    }
    Dtd::new(root, elements, attlists)
}

/// Size of a query for the result DTD bound: its node count.
pub fn query_size(q: &AbstractQuery) -> usize {
    q.len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dtd::{parse_dtd, serialize_dtd, strictly_conforms};
    use crate::eval::evaluate_to_document;
    use crate::fixtures::{movie_document, movie_dtd, sample_query};
    use crate::query::{translate, NodeOp, StringMatcher};

    fn el(n: &str) -> ContentDef {
        ContentDef::element(n)
    }

    #[test]
    fn simplify_rules() {
        let e = ContentDef::EmptySym;
        assert_eq!(simplify(&ContentDef::Seq(vec![el("a"), e.clone(), el("b")])), ContentDef::Seq(vec![el("a"), el("b")]));
        assert_eq!(simplify(&ContentDef::Choice(vec![e.clone(), el("a")])), ContentDef::opt(el("a")));
        assert_eq!(simplify(&ContentDef::plus(e.clone())), ContentDef::Empty);
        assert_eq!(simplify(&ContentDef::Seq(vec![e.clone(), el("a")])), el("a"));
        assert_eq!(simplify(&ContentDef::opt(e.clone())), ContentDef::Empty);
        assert_eq!(simplify(&ContentDef::star(e.clone())), ContentDef::Empty);
        assert_eq!(simplify(&ContentDef::Choice(vec![ContentDef::Pcdata, e])), ContentDef::Pcdata);
    }

    #[test]
    fn sample_element_names() {
        let names = result_element_names(&translate(&sample_query()), &movie_dtd());
        assert_eq!(names, ["descr", "movie", "movieInfo", "title"].map(String::from).into());

        let mut all = AbstractQuery::with_root("movieInfo", StringMatcher::True, NodeOp::And);
        all.set_output(all.root(), true);
        assert_eq!(result_element_names(&all, &movie_dtd()).len(), 7);

        let none = AbstractQuery::with_root("movieInfo", StringMatcher::True, NodeOp::And);
        assert_eq!(result_element_names(&none, &movie_dtd()), ["movieInfo".to_owned()].into());
    }

    #[test]
    fn sample_content_definitions() {
        let q = translate(&sample_query());
        let d = movie_dtd();
        assert_eq!(
            create_content_definition("movie", &q, &d),
            ContentDef::Seq(vec![ContentDef::opt(el("descr")), ContentDef::opt(el("title"))])
        );
        assert_eq!(create_content_definition("descr", &q, &d), ContentDef::Pcdata);
        assert_eq!(create_content_definition("actor", &q, &d), ContentDef::Empty);
        assert_eq!(
            create_content_definition("movieInfo", &q, &d),
            ContentDef::plus(ContentDef::opt(el("movie")))
        );
    }

    #[test]
    fn sample_result_dtd() {
        let q = translate(&sample_query());
        let d = movie_dtd();
        let rd = create_result_dtd(&q, &d).unwrap();
        assert_eq!(rd.root(), "movieInfo");
        assert_eq!(rd.elements().len(), 4);
        let text = serialize_dtd(&rd).unwrap();
        assert!(text.contains("<!ELEMENT movie (descr?,title?)>"), "{text}");
        assert_eq!(parse_dtd(&text).unwrap(), rd);
        let result = evaluate_to_document(&movie_document(), &q).unwrap();
        assert!(strictly_conforms(&result, &rd).is_ok());
        assert!(rd.size() <= 4 * (d.size() + query_size(&q)));
    }

    #[test]
    fn whole_document_output() {
        let mut q = AbstractQuery::with_root("movieInfo", StringMatcher::True, NodeOp::And);
        q.set_output(q.root(), true);
        let d = movie_dtd();
        let rd = create_result_dtd(&q, &d).unwrap();
        assert_eq!(rd.content("movie"), d.content("movie"));
        let star = rd.attribute("character", "star").unwrap();
        assert_eq!((star.ty, star.presence), (AttrType::Cdata, Presence::Implied));
        assert_eq!(rd.attribute("actor", "id").unwrap().ty, AttrType::Id);
        let doc = movie_document();
        assert!(strictly_conforms(&evaluate_to_document(&doc, &q).unwrap(), &rd).is_ok());
    }

    #[test]
    fn empty_output_set() {
        let q = AbstractQuery::with_root("movieInfo", StringMatcher::True, NodeOp::And);
        let rd = create_result_dtd(&q, &movie_dtd()).unwrap();
        assert_eq!(rd.elements().len(), 1);
        assert_eq!(rd.content("movieInfo"), Some(&ContentDef::Empty));
    }

    #[test]
    fn aggregate_extension() {
        let mut cq = sample_query();
        cq.children[0].children[2].agg.push(crate::query::AggFn::Count);
        let q = translate(&cq);
        let rd = create_result_dtd(&q, &movie_dtd()).unwrap();
        assert_eq!(
            rd.content("movie"),
            Some(&ContentDef::Seq(vec![
                ContentDef::Seq(vec![ContentDef::opt(el("descr")), ContentDef::opt(el("title"))]),
                ContentDef::star(el(AGG_ELEMENT)),
            ]))
        );
        let r = crate::aggregate::evaluate_aggregated(&movie_document(), &q);
        assert!(strictly_conforms(r.document.as_ref().unwrap(), &rd).is_ok());
        assert!(serialize_dtd(&rd).unwrap().contains("<!ELEMENT equix-agg EMPTY>"));
    }

    #[test]
    fn any_stub_accepts_results() {
        let doc = movie_document();
        let rd = any_result_dtd("movieInfo", std::slice::from_ref(&doc)).unwrap();
        assert!(strictly_conforms(&doc, &rd).is_ok());
        assert_eq!(rd.content("movie"), Some(&ContentDef::Any));
    }
}
