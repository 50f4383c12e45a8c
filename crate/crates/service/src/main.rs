use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{Context, Result};
use axum::http::HeaderValue;
use clap::Parser;

use textlstm_service::{router, AppState, Cors};

#[derive(Parser, Debug)]
#[command(name = "textlstm-serve", version, about = "Serve textlstm checkpoints over HTTP")]
struct Args {
    /// Directory of `*.ckpt` files; each file stem becomes a model id
    #[arg(long, default_value = "models")]
    models: PathBuf,
    /// Address to listen on
    #[arg(long, default_value = "127.0.0.1:8080")]
    bind: SocketAddr,
    /// Browser origin allowed to call the API (repeatable)
    #[arg(long = "cors-origin", default_value = "http://localhost:5173")]
    cors_origins: Vec<String>,
    /// Allow any origin
    #[arg(long, conflicts_with = "cors_origins")]
    cors_any: bool,
    /// Send no CORS headers
    #[arg(long, conflicts_with_all = ["cors_origins", "cors_any"])]
    no_cors: bool,
}

#[tokio::main]
async fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    let state = AppState::load_dir(&args.models)?;
    let cors = if args.no_cors {
        Cors::Disabled
    } else if args.cors_any {
        Cors::Any
    } else {
        let origins = args
            .cors_origins
            .iter()
            .map(|o| HeaderValue::from_str(o).with_context(|| format!("invalid origin {o:?}")))
            .collect::<Result<Vec<_>>>()?;
        Cors::Origins(origins)
    };
    log::info!("{} models loaded, listening on http://{}", state.len(), args.bind);
    let listener = tokio::net::TcpListener::bind(args.bind)
        .await
        .with_context(|| format!("cannot bind {}", args.bind))?;
    axum::serve(listener, router(Arc::new(state), cors)).await?;
    Ok(())
}
