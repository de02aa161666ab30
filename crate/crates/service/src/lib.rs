//! Local HTTP service for annotation sessions.
//!
//! A project directory holds `config.json`, `videos.json`, `tasks.json`, a
//! `videos/` folder and the append-only `log.ndjson`. All state is rebuilt
//! from the log on start, so killing the process at any point loses at most
//! the request in flight.

pub mod api;
pub mod state;
pub mod store;

use std::path::Path;
use std::sync::{Arc, Mutex};

pub use api::{router, Shared};
pub use state::{
    Accepted, Annotator, GateOutcome, Project, RejectKind, Rejection, ServiceError, Session, Submission, Task,
};

/// Opens the project and returns a router over its state.
pub fn app(dir: &Path) -> Result<axum::Router, ServiceError> {
    let annotator = Annotator::open(Project::open(dir)?)?;
    Ok(router(Arc::new(Mutex::new(annotator))))
}

/// Serves the project until Ctrl-C. Prints `listening on http://ADDR` once
/// the socket is bound; `bind` overrides the configured address.
pub async fn serve(dir: &Path, bind: Option<&str>) -> Result<(), ServiceError> {
    let project = Project::open(dir)?;
    let addr = bind
        .map(str::to_string)
        .unwrap_or_else(|| project.config.service.bind.clone());
    let annotator = Annotator::open(project)?;
    let listener = tokio::net::TcpListener::bind(&addr).await?;
    println!("listening on http://{}", listener.local_addr()?);
    use std::io::Write;
    std::io::stdout().flush()?;
    axum::serve(listener, router(Arc::new(Mutex::new(annotator))))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
