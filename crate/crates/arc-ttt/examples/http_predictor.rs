//! Shows the wire protocol of the HTTP predictor against an in-process
//! stub server: POST {endpoint}/completions with {"model", "prompt",
//! "temperature": 0, "max_tokens"}, answered by {"choices": [{"text"}]}.
//!
//! Run with: cargo run --example http_predictor

use arc_ttt::codec::{render_grid_text, render_prompt};
use arc_ttt::grid::Grid;
use arc_ttt::predictor::{HttpConfig, HttpPredictor, Predictor};
use std::io::{Read, Write};

fn main() {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let endpoint = format!("http://{}", listener.local_addr().unwrap());

    // One-shot server: echoes a fixed grid back as the completion text.
    std::thread::spawn(move || {
        let (mut stream, _) = listener.accept().unwrap();
        let mut buf = [0u8; 65536];
        let n = stream.read(&mut buf).unwrap();
        let request = String::from_utf8_lossy(&buf[..n]);
        let body_at = request.find("\r\n\r\n").unwrap() + 4;
        println!("server saw request body:\n{}\n", request[body_at..].chars().take(200).collect::<String>());
        let text = render_grid_text(&Grid::new(&[vec![4, 2], vec![2, 4]]).unwrap());
        let body = serde_json::json!({"choices": [{"text": text}]}).to_string();
        let response = format!(
            "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
            body.len()
        );
        stream.write_all(response.as_bytes()).unwrap();
    });

    let predictor = HttpPredictor::new(HttpConfig { endpoint, ..HttpConfig::default() }).unwrap();
    let prompt = render_prompt(&[], &Grid::new(&[vec![1, 2], vec![3, 4]]).unwrap());
    let prediction = predictor.predict(&prompt).unwrap();
    match prediction.grid {
        Some(grid) => println!("parsed prediction:\n{}", render_grid_text(&grid)),
        None => println!("prediction failed: {:?}", prediction.failure),
    }
}
