#![allow(dead_code)]

use std::path::Path;
use std::time::{Duration, Instant};

use reqwest::{Client, StatusCode};
use serde_json::{json, Value};
use shadowvae_core::dataset::StrokeSet;
use shadowvae_oracles::drawings;
use shadowvae_service::{serve, ServiceConfig};

pub struct Server {
    pub base: String,
    pub client: Client,
}

impl Server {
    /// Starts a server on an ephemeral port over `data_dir`.
    pub async fn start(data_dir: &Path, workers: usize) -> Self {
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let base = format!("http://{}", listener.local_addr().unwrap());
        let config = ServiceConfig {
            data_dir: data_dir.to_path_buf(),
            workers,
        };
        tokio::spawn(async move { serve(listener, &config).await.unwrap() });
        Self {
            base,
            client: Client::new(),
        }
    }

    pub fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    pub async fn get(&self, path: &str) -> (StatusCode, Value) {
        let resp = self.client.get(self.url(path)).send().await.unwrap();
        let status = resp.status();
        (status, resp.json().await.unwrap_or(Value::Null))
    }

    pub async fn post(&self, path: &str, body: &Value) -> (StatusCode, Value) {
        let resp = self.client.post(self.url(path)).json(body).send().await.unwrap();
        let status = resp.status();
        (status, resp.json().await.unwrap_or(Value::Null))
    }

    pub async fn delete(&self, path: &str) -> (StatusCode, Value) {
        let resp = self.client.delete(self.url(path)).send().await.unwrap();
        let status = resp.status();
        (status, resp.json().await.unwrap_or(Value::Null))
    }

    pub async fn bytes(&self, path: &str) -> (StatusCode, String, Vec<u8>) {
        let resp = self.client.get(self.url(path)).send().await.unwrap();
        let status = resp.status();
        let ctype = resp
            .headers()
            .get("content-type")
            .map(|v| v.to_str().unwrap().to_string())
            .unwrap_or_default();
        (status, ctype, resp.bytes().await.unwrap().to_vec())
    }

    /// Polls a job until it reaches a terminal state.
    pub async fn wait_job(&self, job_id: &str, timeout: Duration) -> Value {
        let start = Instant::now();
        loop {
            let (status, job) = self.get(&format!("/jobs/{job_id}")).await;
            assert_eq!(status, StatusCode::OK, "{job}");
            if ["done", "failed", "cancelled"].contains(&job["state"].as_str().unwrap()) {
                return job;
            }
            assert!(start.elapsed() < timeout, "job {job_id} still {} after {timeout:?}", job["state"]);
            tokio::time::sleep(Duration::from_millis(20)).await;
        }
    }

    pub async fn create_drawn_dataset(&self, per_digit: usize) -> String {
        let (status, body) = self.post("/datasets", &drawn_dataset_request(per_digit, 0)).await;
        assert_eq!(status, StatusCode::CREATED, "{body}");
        body["dataset_id"].as_str().unwrap().to_string()
    }

    pub async fn train(&self, body: &Value) -> Value {
        let (status, resp) = self.post("/train", body).await;
        assert_eq!(status, StatusCode::ACCEPTED, "{resp}");
        resp
    }
}

pub fn strokes_json(strokes: drawings::Strokes) -> Value {
    serde_json::to_value(StrokeSet::new(strokes)).unwrap()
}

/// A dataset request of synthetic drawn zeros (digit a) and ones (digit b).
pub fn drawn_dataset_request(per_digit: usize, seed: u64) -> Value {
    let a: Vec<Value> = (0..per_digit as u64).map(|i| strokes_json(drawings::zero(seed + i))).collect();
    let b: Vec<Value> = (0..per_digit as u64).map(|i| strokes_json(drawings::one(seed + 100 + i))).collect();
    json!({ "kind": "strokes", "digit_a": a, "digit_b": b, "num_images_per_digit": per_digit })
}

pub struct DecodedGif {
    pub width: u16,
    pub height: u16,
    pub delays: Vec<u16>,
    pub frames: Vec<Vec<u8>>,
}

/// Decodes with the `gif` crate, returning one gray value per pixel.
pub fn decode_gif(bytes: &[u8]) -> DecodedGif {
    let mut opts = gif::DecodeOptions::new();
    opts.set_color_output(gif::ColorOutput::RGBA);
    let mut decoder = opts.read_info(bytes).expect("valid GIF header");
    let (width, height) = (decoder.width(), decoder.height());
    let mut delays = Vec::new();
    let mut frames = Vec::new();
    while let Some(frame) = decoder.read_next_frame().expect("valid GIF frame") {
        delays.push(frame.delay);
        frames.push(frame.buffer.chunks(4).map(|px| px[0]).collect());
    }
    DecodedGif {
        width,
        height,
        delays,
        frames,
    }
}
