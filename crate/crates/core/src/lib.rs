//! Query processing over XML catalogs described by DTDs: document and DTD
//! models, query trees, two-pass evaluation, aggregation and result-DTD
//! synthesis.

pub mod aggregate;
pub mod dtd;
pub mod eval;
pub mod fixtures;
pub mod query;
pub mod result_dtd;
pub mod xml;

pub use dtd::{
    conforms, content_model_matches, parse_dtd, parse_dtd_with_root, serialize_dtd,
    strictly_conforms, AttDef, Conformance, ContentDef, Dtd, DtdError, Presence, Violation,
};
pub use xml::{
    parse_document, parse_document_typed, serialize_document, AttrType, Document, NodeId,
    NodeKind, XmlError,
};
pub use query::{
    complement, describable_by, eval_matcher, parse_query, parse_request, serialize_query,
    serialize_request, translate, translate_request, validate_query_against_dtd, AbstractQuery,
    AggConstraint, AggFn, Comparator, ConcreteQueryNode, EdgeQuantifier, Mode, NodeOp, Ontology,
    QNodeId, Quantifier, QueryError, QueryRequest, StringMatcher,
};
pub use eval::{
    enumerate_satisfying_matchings, evaluate, evaluate_catalog, evaluate_to_document,
    is_satisfying_matching, match_table, matches_proc, node_matches, query_evaluate,
    retrieval_matching, union_matchings, Enumeration, Evaluation, MatchArray, Matching, OutputSet,
};
pub use aggregate::{
    attach_aggregates, check_agg_constraints, compute_aggregates, evaluate_aggregated,
    grouping_node, AggResult, AggValue, AggregatedEvaluation,
};
pub use result_dtd::{
    any_result_dtd, create_content_definition, create_result_dtd, result_element_names, simplify,
};
