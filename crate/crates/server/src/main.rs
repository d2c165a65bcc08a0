use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use lab_server::{Server, ServerConfig, SessionManager};

fn usage() -> ! {
    eprintln!("usage: lab-server [--config FILE]");
    eprintln!("settings may be overridden with LAB_SERVER_* environment variables");
    std::process::exit(2);
}

fn config() -> Result<ServerConfig, String> {
    let mut path: Option<PathBuf> = std::env::var_os("LAB_SERVER_CONFIG").map(PathBuf::from);
    let mut args = std::env::args().skip(1);
    while let Some(arg) = args.next() {
        match arg.as_str() {
            "--config" | "-c" => path = Some(args.next().unwrap_or_else(|| usage()).into()),
            "--help" | "-h" => usage(),
            _ => usage(),
        }
    }
    let base = match path {
        Some(p) => ServerConfig::load(&p).map_err(|e| e.to_string())?,
        None => ServerConfig::default(),
    };
    base.apply_env(std::env::vars()).map_err(|e| e.to_string())
}

#[tokio::main]
async fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let config = match config() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("lab-server: {e}");
            return ExitCode::from(2);
        }
    };
    let listener = match tokio::net::TcpListener::bind(&config.listen).await {
        Ok(l) => l,
        Err(e) => {
            eprintln!("lab-server: cannot listen on {}: {e}", config.listen);
            return ExitCode::FAILURE;
        }
    };
    log::info!("listening on {}", listener.local_addr().map(|a| a.to_string()).unwrap_or(config.listen.clone()));
    let server = Server::new(Arc::new(SessionManager::new(config)));
    server
        .serve(listener, async {
            let _ = tokio::signal::ctrl_c().await;
            log::info!("shutting down");
        })
        .await;
    ExitCode::SUCCESS
}
