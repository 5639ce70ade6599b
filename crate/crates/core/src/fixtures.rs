//! The movie catalog sample used throughout the tests and examples.

use std::collections::VecDeque;

use crate::dtd::{parse_dtd, Dtd};
use crate::query::{ConcreteQueryNode, Quantifier, StringMatcher};
use crate::xml::{parse_document_typed, Document, NodeId};

pub const MOVIE_DTD: &str = include_str!("../fixtures/movie.dtd");
pub const MOVIES_XML: &str = include_str!("../fixtures/movies.xml");

pub fn movie_dtd() -> Dtd {
    parse_dtd(MOVIE_DTD).expect("bundled DTD parses")
}

pub fn movie_document() -> Document {
    parse_document_typed(MOVIES_XML, &movie_dtd()).expect("bundled document parses")
}

/// Descriptions and titles of Wild West movies in which Redford does not
/// play a villain.
pub fn sample_query() -> ConcreteQueryNode {
    ConcreteQueryNode::new("movieInfo")
        .child(
            ConcreteQueryNode::new("movie")
                .matcher(StringMatcher::And(vec![
                    StringMatcher::word("wild"),
                    StringMatcher::word("west"),
                ]))
                .child(ConcreteQueryNode::new("descr").output())
                .child(ConcreteQueryNode::new("title").output())
                .child(
                    ConcreteQueryNode::new("character")
                        .quantifier(Quantifier::NotExists)
                        .child(ConcreteQueryNode::new("role").matcher(StringMatcher::word("villain")))
                        .child(ConcreteQueryNode::new("star").matcher(StringMatcher::word("redford"))),
                ),
        )
        .child(ConcreteQueryNode::new("actor"))
}

/// Complex nodes in breadth-first order; `breadth_first_numbering(doc)[k]`
/// is the node the tests call `k`.
pub fn breadth_first_numbering(doc: &Document) -> Vec<NodeId> {
    let mut out = Vec::new();
    let mut queue = VecDeque::from([doc.root()]);
    while let Some(n) = queue.pop_front() {
        out.push(n);
        queue.extend(doc.children(n).iter().copied().filter(|&c| doc.node(c).is_complex()));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbering_lines_up() {
        let doc = movie_document();
        let num = breadth_first_numbering(&doc);
        assert_eq!(num.len(), 31);
        let label = |k: usize| doc.label(num[k]).unwrap().to_owned();
        assert_eq!(label(0), "movieInfo");
        assert_eq!(label(4), "actor");
        assert_eq!(label(12), "character");
        assert_eq!(label(25), "role");
        assert_eq!(label(30), "star");
        assert_eq!(doc.textual_content(num[9]), "villain 436 Jack Robinson");
        assert_eq!(doc.textual_content(num[24]), "436 Jack Robinson");
    }
}
