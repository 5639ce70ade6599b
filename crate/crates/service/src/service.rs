//! Catalog operations shared by the command line tool and the HTTP API.

use equix_core::aggregate::evaluate_aggregated;
use equix_core::dtd::{parse_dtd, serialize_dtd, strictly_conforms, ContentDef, Dtd, DtdTree, Violation};
use equix_core::eval::evaluate_to_document;
use equix_core::query::{
    describable_by, translate_request, validate_query_against_dtd, AbstractQuery, Mode, Ontology, QueryRequest,
};
use equix_core::result_dtd::{any_result_dtd, create_result_dtd};
use equix_core::xml::{parse_document_typed, serialize_document, Document, DocumentBuilder};
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Diagnostic, Result, ServiceError};
use crate::store::{valid_name, Catalog, CatalogSummary, Origin, Store};

#[derive(Debug, Clone, Default)]
pub struct IngestRequest {
    pub name: String,
    pub dtd: String,
    /// `(file name, XML text)` pairs.
    pub documents: Vec<(String, String)>,
    /// New root element wrapped around every document.
    pub wrap_root: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct IngestReport {
    pub catalog_id: String,
    pub accepted: Vec<String>,
    pub rejected: Vec<Rejection>,
}

/// A document left out of a catalog, with every reason found.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Rejection {
    pub document: String,
    pub problems: Vec<String>,
}

fn describe(v: &Violation) -> String {
    match v.node {
        Some(n) => format!("node {n}: {}", v.message),
        None => v.message.clone(),
    }
}

fn reject(document: &str, problem: impl Into<String>) -> Rejection {
    Rejection {
        document: document.to_owned(),
        problems: vec![problem.into()],
    }
}

/// DTD whose new root `label` admits any sequence of the declared elements.
pub fn wrap_dtd(d: &Dtd, label: &str) -> Result<Dtd> {
    if d.content(label).is_some() {
        return Err(ServiceError::validation("dtd", format!("wrap root {label:?} is already declared")));
    }
    let all: Vec<ContentDef> = d.elements().keys().map(|e| ContentDef::element(e)).collect();
    let mut elements = IndexMap::from([(label.to_owned(), ContentDef::star(ContentDef::choice(all)))]);
    elements.extend(d.elements().iter().map(|(k, v)| (k.clone(), v.clone())));
    Dtd::new(label, elements, d.attlists().clone()).map_err(|e| ServiceError::validation("dtd", e.to_string()))
}

fn wrap_document(doc: &Document, label: &str) -> Document {
    let mut b = DocumentBuilder::new();
    b.open(label);
    doc.copy_into(doc.root(), &mut b, &mut |_, _| {});
    b.close();
    b.finish().expect("wrapping keeps the document well formed")
}

pub fn ingest_catalog(store: &Store, req: IngestRequest) -> Result<IngestReport> {
    if !valid_name(&req.name) {
        return Err(ServiceError::validation("catalog", format!("invalid catalog name {:?}", req.name)));
    }
    if store.exists(&req.name) {
        return Err(ServiceError::Duplicate(req.name));
    }
    let original = parse_dtd(&req.dtd).map_err(|e| ServiceError::validation("dtd", e.to_string()))?;
    let dtd = match &req.wrap_root {
        Some(label) => wrap_dtd(&original, label)?,
        None => original.clone(),
    };
    let mut accepted: Vec<(String, String)> = Vec::new();
    let mut rejected = Vec::new();
    for (i, (name, text)) in req.documents.iter().enumerate() {
        let name = if name.is_empty() { format!("doc-{:04}.xml", i + 1) } else { name.clone() };
        if !valid_name(&name) {
            rejected.push(reject(&name, "invalid document name"));
            continue;
        }
        if accepted.iter().any(|(n, _)| *n == name) {
            rejected.push(reject(&name, "duplicate document name"));
            continue;
        }
        let doc = match parse_document_typed(text, &original) {
            Ok(doc) => doc,
            Err(e) => {
                rejected.push(reject(&name, e.to_string()));
                continue;
            }
        };
        let (doc, text) = match &req.wrap_root {
            Some(label) => {
                let wrapped = wrap_document(&doc, label);
                let text = serialize_document(&wrapped);
                (wrapped, text)
            }
            None => (doc, text.clone()),
        };
        let c = strictly_conforms(&doc, &dtd);
        if c.is_ok() {
            accepted.push((name, text));
        } else {
            rejected.push(Rejection {
                document: name,
                problems: c.violations.iter().map(describe).collect(),
            });
        }
    }
    if accepted.is_empty() && !rejected.is_empty() {
        return Err(ServiceError::Validation(
            rejected
                .iter()
                .flat_map(|r| r.problems.iter().map(|p| Diagnostic::new(&r.document, p)))
                .collect(),
        ));
    }
    let _guard = store.write_lock();
    store.create(&req.name, &dtd, &accepted, Origin::Ingested)?;
    Ok(IngestReport {
        catalog_id: req.name,
        accepted: accepted.into_iter().map(|(n, _)| n).collect(),
        rejected,
    })
}

/// Stored outcome of one query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct QueryRun {
    pub run_id: String,
    pub catalog: String,
    pub derived_catalog_id: String,
    pub result_count: usize,
    pub result_dtd: String,
    pub results: Vec<String>,
    pub request: QueryRequest,
}

struct Evaluated {
    results: Vec<Document>,
    dtd: Dtd,
}

fn evaluate_one(doc: &Document, q: &AbstractQuery) -> Option<Document> {
    if q.has_aggregation() {
        evaluate_aggregated(doc, q).document
    } else {
        evaluate_to_document(doc, q)
    }
}

fn evaluate_child(catalog: &Catalog, req: &QueryRequest) -> Result<Evaluated> {
    let problems = validate_query_against_dtd(&req.query, &catalog.dtd);
    if !problems.is_empty() {
        return Err(ServiceError::Validation(
            problems.into_iter().map(|p| Diagnostic::new("query", p)).collect(),
        ));
    }
    let q = translate_request(req);
    let results = catalog
        .documents
        .iter()
        .filter_map(|d| evaluate_one(&d.document, &q))
        .collect();
    let dtd = create_result_dtd(&q, &catalog.dtd).map_err(|e| ServiceError::Internal(e.to_string()))?;
    Ok(Evaluated { results, dtd })
}

fn evaluate_descendant(store: &Store, req: &QueryRequest) -> Result<Evaluated> {
    let Some(terms) = &req.ontology else {
        return Err(ServiceError::validation("query", "descendant mode needs an ontology"));
    };
    let ontology = Ontology::new(terms.iter().cloned());
    let q = translate_request(req);
    let mut results = Vec::new();
    for catalog in store.load_all()? {
        for d in &catalog.documents {
            if describable_by(&d.document, &ontology) {
                results.extend(evaluate_one(&d.document, &q));
            }
        }
    }
    let dtd = any_result_dtd(&req.query.label, &results).map_err(|e| ServiceError::Internal(e.to_string()))?;
    Ok(Evaluated { results, dtd })
}

/// Evaluates a query over a catalog (or, in descendant mode, over every
/// catalog the ontology describes) and stores the results as a new catalog.
pub fn run_query(store: &Store, catalog_id: &str, mut req: QueryRequest) -> Result<QueryRun> {
    let catalog = store.load(catalog_id)?;
    if req.catalog.is_empty() {
        req.catalog = catalog_id.to_owned();
    } else if req.catalog != catalog_id {
        return Err(ServiceError::validation(
            "query",
            format!("query names catalog {:?} but was sent to {catalog_id:?}", req.catalog),
        ));
    }
    let ev = match req.mode {
        Mode::Child => evaluate_child(&catalog, &req)?,
        Mode::Descendant => evaluate_descendant(store, &req)?,
    };
    for (i, r) in ev.results.iter().enumerate() {
        let c = strictly_conforms(r, &ev.dtd);
        if !c.is_ok() {
            return Err(ServiceError::Internal(format!(
                "result {} does not conform to the result DTD: {:?}",
                i + 1,
                c.violations
            )));
        }
    }
    let results: Vec<String> = ev.results.iter().map(serialize_document).collect();
    let result_dtd = serialize_dtd(&ev.dtd).map_err(|e| ServiceError::Internal(e.to_string()))?;
    let docs: Vec<(String, String)> = results
        .iter()
        .enumerate()
        .map(|(i, t)| (format!("result-{:04}.xml", i + 1), t.clone()))
        .collect();

    let _guard = store.write_lock();
    let run_id = store.next_run_id()?;
    let derived = format!("{catalog_id}-{run_id}");
    store.create(
        &derived,
        &ev.dtd,
        &docs,
        Origin::Derived {
            source: catalog_id.to_owned(),
            run: run_id.clone(),
        },
    )?;
    let run = QueryRun {
        run_id: run_id.clone(),
        catalog: catalog_id.to_owned(),
        derived_catalog_id: derived,
        result_count: results.len(),
        result_dtd: result_dtd.clone(),
        results,
        request: req,
    };
    store.save_run(catalog_id, &run_id, &run, &result_dtd)?;
    Ok(run)
}

pub fn get_run(store: &Store, run_id: &str) -> Result<QueryRun> {
    store.load_run(run_id)
}

pub fn list_catalogs(store: &Store) -> Result<Vec<CatalogSummary>> {
    store.list()
}

#[derive(Debug, Clone, Serialize)]
pub struct DocumentView {
    pub name: String,
    pub xml: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct CatalogView {
    pub id: String,
    pub root: String,
    pub origin: Origin,
    pub dtd: String,
    pub documents: Vec<DocumentView>,
}

pub fn get_catalog(store: &Store, id: &str) -> Result<CatalogView> {
    let c = store.load(id)?;
    Ok(CatalogView {
        root: c.dtd.root().to_owned(),
        id: c.id,
        origin: c.origin,
        dtd: c.dtd_text,
        documents: c
            .documents
            .into_iter()
            .map(|d| DocumentView { name: d.name, xml: d.text })
            .collect(),
    })
}

pub fn get_dtd_tree(store: &Store, id: &str) -> Result<DtdTree> {
    Ok(store.load(id)?.dtd.tree_view())
}

/// Re-checks every stored document against the catalog DTD.
pub fn validate_catalog(store: &Store, id: &str) -> Result<Vec<Diagnostic>> {
    let c = store.load(id)?;
    Ok(c.documents
        .iter()
        .flat_map(|d| {
            strictly_conforms(&d.document, &c.dtd)
                .violations
                .iter()
                .map(|v| Diagnostic::new(&d.name, describe(v)))
                .collect::<Vec<_>>()
        })
        .collect())
}
