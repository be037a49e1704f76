//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use afp_core::distance::SquareMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn fixture_manifests() -> Vec<PathBuf> {
    let mut out: Vec<PathBuf> = std::fs::read_dir(fixture(""))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.to_string_lossy().ends_with(".manifest.json"))
        .collect();
    out.sort();
    out
}

/// Symmetric matrix with zero diagonal and entries uniform in [0, 1).
pub fn random_distance_matrix(rng: &mut ChaCha8Rng, n: usize) -> SquareMatrix {
    let mut d = SquareMatrix::zeros(n);
    for i in 0..n {
        for j in (i + 1)..n {
            d.set_pair(i, j, rng.gen_range(0.0..1.0));
        }
    }
    d
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn mean_cross(d: &SquareMatrix, a: &[usize], b: &[usize]) -> f64 {
    let mut sum = 0.0;
    for &i in a {
        for &j in b {
            sum += d.get(i, j);
        }
    }
    sum / (a.len() * b.len()) as f64
}

fn sort_partition(mut p: Vec<Vec<usize>>) -> Vec<Vec<usize>> {
    for c in &mut p {
        c.sort_unstable();
    }
    p.sort();
    p
}

/// Textbook average linkage: recomputes every cross-pair mean from the raw
/// matrix at each step and scans candidate pairs by (smallest member of the
/// first, smallest member of the second).
pub fn naive_average_linkage(d: &SquareMatrix, tau: f64) -> Vec<Vec<usize>> {
    let mut clusters: Vec<Vec<usize>> = (0..d.len()).map(|i| vec![i]).collect();
    loop {
        clusters = sort_partition(clusters);
        let mut candidates = Vec::new();
        for a in 0..clusters.len() {
            for b in 0..clusters.len() {
                if clusters[a][0] < clusters[b][0] {
                    let key = (clusters[a][0], clusters[b][0]);
                    candidates.push((mean_cross(d, &clusters[a], &clusters[b]), key, a, b));
                }
            }
        }
        let Some(min) = candidates.iter().map(|c| c.0).reduce(f64::min) else {
            return clusters;
        };
        if min >= tau {
            return clusters;
        }
        let (_, _, a, b) = candidates
            .into_iter()
            .filter(|c| c.0 == min)
            .min_by_key(|c| c.1)
            .unwrap();
        let moved = clusters[b].clone();
        clusters[a].extend(moved);
        clusters.remove(b);
    }
}

/// Step-by-step singleton refinement; returns the partition after each step.
pub fn refinement_trace(start: Vec<Vec<usize>>, d_cos: &SquareMatrix) -> Vec<Vec<Vec<usize>>> {
    let mut clusters = sort_partition(start);
    let mut trace = vec![clusters.clone()];
    while clusters.len() > 1 {
        let singles: Vec<usize> = (0..clusters.len()).filter(|&k| clusters[k].len() < 2).collect();
        let Some(&s) = singles.iter().min_by_key(|&&k| clusters[k][0]) else {
            break;
        };
        let mut best: Option<(f64, usize, usize)> = None;
        for k in 0..clusters.len() {
            if k == s {
                continue;
            }
            let cand = (mean_cross(d_cos, &clusters[s], &clusters[k]), clusters[k][0], k);
            best = match best {
                Some(b) if (b.0, b.1) <= (cand.0, cand.1) => Some(b),
                _ => Some(cand),
            };
        }
        let (_, _, k) = best.unwrap();
        let moved = clusters[s].clone();
        clusters[k].extend(moved);
        clusters.remove(s);
        clusters = sort_partition(clusters);
        trace.push(clusters.clone());
    }
    trace
}

/// Every block of `fine` lies inside some block of `coarse`.
pub fn refines(fine: &[Vec<usize>], coarse: &[Vec<usize>]) -> bool {
    fine.iter()
        .all(|f| coarse.iter().any(|c| f.iter().all(|x| c.contains(x))))
}

/// Gaussian KDE evaluated by direct summation on `points` evenly spaced
/// points over [lo, hi]; returns the first argmax.
pub fn brute_force_peak(samples: &[f64], h: f64, lo: f64, hi: f64, points: usize) -> f64 {
    let norm = 1.0 / (samples.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    let mut best = (f64::NEG_INFINITY, lo);
    for k in 0..points {
        let x = lo + (hi - lo) * k as f64 / (points - 1) as f64;
        let y: f64 = samples.iter().map(|s| (-0.5 * ((x - s) / h).powi(2)).exp()).sum::<f64>() * norm;
        if y > best.0 {
            best = (y, x);
        }
    }
    best.1
}

/// Sample standard deviation times n^(-1/5).
pub fn scott(samples: &[f64]) -> f64 {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
    var.sqrt() * n.powf(-0.2)
}

/// 90 samples near 0.1 and 10 near 0.8, jittered by at most 0.01.
pub fn bimodal_samples(seed: u64) -> Vec<f64> {
    let mut rng = seeded(seed);
    let mut s: Vec<f64> = (0..90).map(|_| 0.1 + rng.gen_range(-0.01..0.01)).collect();
    s.extend((0..10).map(|_| 0.8 + rng.gen_range(-0.01..0.01)));
    s
}

/// Accepts connections and never answers; returns its base URL.
pub fn silent_server() -> String {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    std::thread::spawn(move || {
        let mut held = Vec::new();
        for stream in listener.incoming() {
            held.push(stream);
        }
    });
    format!("http://{addr}/v1/chat")
}

/// Answers one request with `body` as JSON; the returned receiver yields the
/// raw request text.
pub fn one_shot_server(body: String) -> (String, std::sync::mpsc::Receiver<String>) {
    use std::io::{Read, Write};
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        let (mut stream, _) = listener.accept().unwrap();
        let mut buf = Vec::new();
        let mut chunk = [0u8; 4096];
        loop {
            let n = stream.read(&mut chunk).unwrap();
            buf.extend_from_slice(&chunk[..n]);
            let text = String::from_utf8_lossy(&buf).to_string();
            if let Some(end) = text.find("\r\n\r\n") {
                let len = text[..end]
                    .lines()
                    .find_map(|l| {
                        let (k, v) = l.split_once(':')?;
                        k.eq_ignore_ascii_case("content-length").then(|| v.trim().parse::<usize>().ok())?
                    })
                    .unwrap_or(0);
                if buf.len() >= end + 4 + len || n == 0 {
                    break;
                }
            }
            if n == 0 {
                break;
            }
        }
        let reply = format!(
            "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
            body.len(),
            body
        );
        stream.write_all(reply.as_bytes()).unwrap();
        tx.send(String::from_utf8_lossy(&buf).to_string()).unwrap();
    });
    (format!("http://{addr}/v1/chat"), rx)
}
