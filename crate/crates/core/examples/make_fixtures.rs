//! Regenerates the synthetic manifests under `tests/fixtures/`.
//!
//! `cargo run -p afp-core --example make_fixtures`

use std::path::Path;

use afp_core::ingest::{Dims, FramePayload, FrameRecord, Manifest};
use afp_core::FUSED_DIM;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sparse(components: &[(usize, f64)]) -> Vec<f64> {
    let mut v = vec![0.0; FUSED_DIM];
    for &(i, x) in components {
        v[i] += x;
    }
    v
}

fn prefused(id: String, t: f64, score: f64, v: Vec<f64>) -> FrameRecord {
    FrameRecord {
        frame_id: id,
        timestamp_s: t,
        score,
        features: FramePayload::PreFused(v),
    }
}

/// 12 near-identical static shots, 3 slightly shifted shots, 1 distinct shot.
fn qualitative16() -> Manifest {
    let mut frames = Vec::new();
    for k in 0..12 {
        let a = k as f64;
        let v = sparse(&[(0, 1.0), (3, 0.04 * a.cos()), (4, 0.04 * a.sin())]);
        frames.push(prefused(format!("f{k:02}"), k as f64, 0.5 + 0.03 * (a * 1.7).sin(), v));
    }
    for k in 0..3 {
        let a = k as f64;
        let v = sparse(&[(0, 1.0), (1, 1.0), (5, 0.04 * a.cos()), (6, 0.04 * a.sin())]);
        frames.push(prefused(format!("f{:02}", 12 + k), 12.0 + a, 0.6 + 0.05 * a, v));
    }
    frames.push(prefused("f15".into(), 15.0, 0.4, sparse(&[(2, 1.0), (0, 0.3)])));
    Manifest::new("qualitative16", Dims::Prefused, frames).unwrap()
}

fn single() -> Manifest {
    Manifest::new(
        "single",
        Dims::Prefused,
        vec![prefused("only".into(), 4.5, 0.9, sparse(&[(7, 1.0)]))],
    )
    .unwrap()
}

/// Grouped random directions with per-frame jitter.
fn grouped(video_id: &str, seed: u64, groups: &[usize], jitter: f64) -> Manifest {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers: Vec<Vec<f64>> = groups
        .iter()
        .map(|_| (0..FUSED_DIM).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let mut frames = Vec::new();
    let mut t = 0.0;
    for (g, &size) in groups.iter().enumerate() {
        for _ in 0..size {
            let v: Vec<f64> = centers[g]
                .iter()
                .map(|c| c + jitter * rng.gen_range(-1.0..1.0))
                .collect();
            let id = format!("k{:02}", frames.len());
            frames.push(prefused(id, t, rng.gen_range(0.0..1.0), v));
            t += rng.gen_range(0.5..3.0);
        }
    }
    Manifest::new(video_id, Dims::Prefused, frames).unwrap()
}

/// Raw branch vectors with small declared dimensions.
fn raw_small() -> Manifest {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let (dr, dc) = (24, 12);
    let base_r: Vec<Vec<f64>> = (0..3).map(|_| (0..dr).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let base_c: Vec<Vec<f64>> = (0..3).map(|_| (0..dc).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let frames = (0..10)
        .map(|i| {
            let g = [0, 0, 0, 0, 1, 1, 1, 2, 2, 0][i];
            let resnet = base_r[g].iter().map(|x| x + 0.05 * rng.gen_range(-1.0..1.0)).collect();
            let clip = base_c[g].iter().map(|x| x + 0.05 * rng.gen_range(-1.0..1.0)).collect();
            FrameRecord {
                frame_id: format!("r{i}"),
                timestamp_s: 2.0 * i as f64,
                score: rng.gen_range(0.0..1.0),
                features: FramePayload::RawPair { resnet, clip },
            }
        })
        .collect();
    Manifest::new("raw_small", Dims::Branches { resnet: dr, clip: dc }, frames).unwrap()
}

fn main() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    std::fs::create_dir_all(&dir).unwrap();
    let manifests = [
        qualitative16(),
        single(),
        grouped("counting32", 7, &[7, 9, 6, 10], 0.08),
        grouped("mixed20", 21, &[5, 3, 8, 1, 3], 0.15),
        raw_small(),
    ];
    for m in &manifests {
        let path = dir.join(format!("{}.manifest.json", m.video_id));
        std::fs::write(&path, m.to_json()).unwrap();
        println!("wrote {}", path.display());
    }
    std::fs::write(
        dir.join("qualitative16.graph.json"),
        r#"{"nodes": ["ambulance", "road", "tent"], "triplets": [["ambulance", "moving along", "road"], ["tent", "beside", "road"]]}"#,
    )
    .unwrap();
    std::fs::write(
        dir.join("qualitative16.qa.json"),
        r#"{"question": "Which object in the video is moving fastest?", "options": ["Ambulance", "Tent", "Pedestrian", "Bicycle"]}"#,
    )
    .unwrap();
}
