//! Starts the HTTP service on a local port and talks to it with plain
//! HTTP/1.1 requests: list models, fetch a similarity map, build a mask and,
//! when a trained model directory is given, compress and decompress.
//!
//! cargo run --release --example http_service -- 8089 models

use std::path::PathBuf;
use std::sync::Arc;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use croi::data::synthetic_scene;
use croi::registry::ModelRegistry;
use croi::service::{serve, Backends, Session};
use croi::tma::BackendKind;
use serde_json::{json, Value};
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::TcpStream;

async fn request(port: u16, method: &str, path: &str, body: Option<&Value>) -> std::io::Result<(u16, Value)> {
    let mut stream = TcpStream::connect(("127.0.0.1", port)).await?;
    let payload = body.map(|b| b.to_string()).unwrap_or_default();
    let head = format!(
        "{method} {path} HTTP/1.1\r\nHost: localhost\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
        payload.len()
    );
    stream.write_all(head.as_bytes()).await?;
    stream.write_all(payload.as_bytes()).await?;
    let mut raw = Vec::new();
    stream.read_to_end(&mut raw).await?;
    let text = String::from_utf8_lossy(&raw);
    let status = text.split_whitespace().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let body = text.split_once("\r\n\r\n").map_or("", |(_, b)| b);
    Ok((status, serde_json::from_str(body).unwrap_or(Value::Null)))
}

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let port: u16 = args.next().and_then(|s| s.parse().ok()).unwrap_or(8089);
    let model_dir = args.next().map(PathBuf::from);

    let session = Arc::new(Session::new(ModelRegistry::new(model_dir.clone()), Backends::default(), BackendKind::Synthetic));
    tokio::spawn(serve(session, port));
    tokio::time::sleep(std::time::Duration::from_millis(200)).await;

    let (status, models) = request(port, "GET", "/v1/models", None).await?;
    println!("GET /v1/models -> {status}: lambda table {}", models["lambda_table"]);

    let image = B64.encode(synthetic_scene(128, 7).image.encode_png()?);
    let ask = json!({"image": image, "text": "red disc", "eta": 0.8});
    let (status, sim) = request(port, "POST", "/v1/similarity", Some(&ask)).await?;
    println!("POST /v1/similarity -> {status}: {}x{} map", sim["height"], sim["width"]);
    let (status, mask) = request(port, "POST", "/v1/mask", Some(&ask)).await?;
    println!("POST /v1/mask -> {status}: roi fraction {}", mask["roi_pixel_fraction"]);

    let (status, c) = request(port, "POST", "/v1/compress", Some(&ask)).await?;
    if status != 200 {
        println!("POST /v1/compress -> {status}: {} ({})", c["code"], c["message"]);
        return Ok(());
    }
    println!("POST /v1/compress -> {status}: {:.3} bpp, psnr {:.2} dB", c["bpp"].as_f64().unwrap_or(0.0), c["psnr"].as_f64().unwrap_or(0.0));
    let (status, d) = request(port, "POST", "/v1/decompress", Some(&json!({"container": c["container"]}))).await?;
    println!("POST /v1/decompress -> {status}: {}x{}, provenance {}", d["height"], d["width"], d["provenance"]);
    Ok(())
}
