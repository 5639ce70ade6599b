use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use equix_service::http::{parse_query_body, serve};
use equix_service::service::{self, IngestRequest};
use equix_service::{ServiceError, Store};
use serde::Serialize;

/// Search processor for DTD-conforming XML catalogs.
#[derive(Parser)]
#[command(name = "equix", version)]
struct Cli {
    /// Store directory holding the catalogs.
    #[arg(long, global = true, default_value = "store")]
    store: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Create a catalog from a DTD and a directory of XML documents.
    Ingest {
        #[arg(long)]
        name: String,
        #[arg(long)]
        dtd: PathBuf,
        #[arg(long)]
        docs: PathBuf,
        /// Wrap every document in a new root element with this label.
        #[arg(long)]
        wrap_root: Option<String>,
    },
    /// Re-check every document of a catalog against its DTD.
    Validate {
        #[arg(long)]
        catalog: String,
    },
    /// Run a query file against a catalog.
    Query {
        #[arg(long)]
        catalog: String,
        #[arg(long)]
        query: PathBuf,
        /// Directory receiving one XML file per result.
        #[arg(long)]
        out: Option<PathBuf>,
        /// File receiving the result DTD.
        #[arg(long)]
        emit_dtd: Option<PathBuf>,
    },
    /// List catalogs.
    Catalogs,
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
    },
}

fn read(path: &Path) -> Result<String, ServiceError> {
    fs::read_to_string(path).map_err(|e| ServiceError::BadRequest(format!("{}: {e}", path.display())))
}

fn print_json<T: Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable"));
}

fn xml_files(dir: &Path) -> Result<Vec<(String, String)>, ServiceError> {
    let entries = fs::read_dir(dir).map_err(|e| ServiceError::BadRequest(format!("{}: {e}", dir.display())))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "xml"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| Ok((p.file_name().unwrap().to_string_lossy().into_owned(), read(p)?)))
        .collect()
}

/// Ok(true) on success, Ok(false) when validation problems were reported.
fn run(cli: Cli) -> Result<bool, ServiceError> {
    let store = Store::open(&cli.store)?;
    match cli.command {
        Command::Ingest {
            name,
            dtd,
            docs,
            wrap_root,
        } => {
            let req = IngestRequest {
                name,
                dtd: read(&dtd)?,
                documents: xml_files(&docs)?,
                wrap_root,
            };
            let report = service::ingest_catalog(&store, req)?;
            print_json(&report);
            Ok(report.rejected.is_empty())
        }
        Command::Validate { catalog } => {
            let problems = service::validate_catalog(&store, &catalog)?;
            for p in &problems {
                eprintln!("{}: {}", p.subject, p.message);
            }
            Ok(problems.is_empty())
        }
        Command::Query {
            catalog,
            query,
            out,
            emit_dtd,
        } => {
            let req = parse_query_body(&catalog, &read(&query)?)?;
            let run = service::run_query(&store, &catalog, req)?;
            if let Some(dir) = out {
                fs::create_dir_all(&dir)?;
                for (i, r) in run.results.iter().enumerate() {
                    fs::write(dir.join(format!("result-{:04}.xml", i + 1)), r)?;
                }
            }
            if let Some(path) = emit_dtd {
                fs::write(path, &run.result_dtd)?;
            }
            print_json(&serde_json::json!({
                "runId": run.run_id,
                "resultCount": run.result_count,
                "derivedCatalogId": run.derived_catalog_id,
            }));
            Ok(true)
        }
        Command::Catalogs => {
            print_json(&service::list_catalogs(&store)?);
            Ok(true)
        }
        Command::Serve { port } => {
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(serve(store, ([127, 0, 0, 1], port).into()))?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            if let ServiceError::Validation(ds) = &e {
                for d in ds {
                    eprintln!("  {}: {}", d.subject, d.message);
                }
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
