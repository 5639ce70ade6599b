//! Catalog store, operations and HTTP API around `equix-core`.

pub mod error;
pub mod http;
pub mod service;
pub mod store;

pub use error::{Diagnostic, ServiceError};
pub use service::{
    get_catalog, get_dtd_tree, get_run, ingest_catalog, list_catalogs, run_query, validate_catalog, IngestReport, Rejection,
    IngestRequest, QueryRun,
};
pub use store::{Catalog, CatalogSummary, Origin, Store};
