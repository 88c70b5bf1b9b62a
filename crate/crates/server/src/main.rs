use std::net::SocketAddr;
use std::sync::Arc;

use al_server::{router, AppConfig};
use clap::Parser;

#[derive(Debug, Parser)]
#[command(name = "al-serve", about = "Serve an active learning loop to a human annotator")]
struct Cli {
    #[command(flatten)]
    app: AppConfig,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    #[arg(long, default_value_t = 8080)]
    port: u16,
}

#[tokio::main]
async fn main() {
    let cli = Cli::parse();
    let state = match cli.app.open() {
        Ok(state) => Arc::new(state),
        Err(e) => {
            eprintln!("al-serve: {e}");
            std::process::exit(1);
        }
    };
    let addr: SocketAddr = match format!("{}:{}", cli.host, cli.port).parse() {
        Ok(a) => a,
        Err(e) => {
            eprintln!("al-serve: bad address: {e}");
            std::process::exit(2);
        }
    };
    let listener = match tokio::net::TcpListener::bind(addr).await {
        Ok(l) => l,
        Err(e) => {
            eprintln!("al-serve: cannot bind {addr}: {e}");
            std::process::exit(1);
        }
    };
    eprintln!("al-serve: listening on http://{addr}");
    let shutdown = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    if let Err(e) = axum::serve(listener, router(state)).with_graceful_shutdown(shutdown).await {
        eprintln!("al-serve: {e}");
        std::process::exit(1);
    }
}
