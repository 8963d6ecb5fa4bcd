//! Writes the seed corpus for the fuzz targets.
//!
//! `cargo run -p salt-core --example fuzz_seeds -- fuzz/corpus`

use salt_core::codec::rle::encode_runs;
use salt_core::codec::{encode_sequence, write_raw_clip, CodecParams, Frame};
use salt_core::exemplar::fit;
use salt_core::perfmodel::{distribution_scenarios, Site};
use salt_core::ring::RingParams;
use salt_core::rlwe::{encrypt, keygen, Plaintext};
use salt_core::storage::{
    archive, create_pool, save_checkpoint, ArchiveOptions, CheckpointState, DriveKind, PoolLayout, Stage, Staging,
};
use std::path::{Path, PathBuf};

fn put(root: &Path, target: &str, name: &str, bytes: &[u8]) {
    let dir = root.join(target);
    std::fs::create_dir_all(&dir).unwrap();
    std::fs::write(dir.join(name), bytes).unwrap();
}

fn frames(n: usize) -> Vec<Frame> {
    (0..n)
        .map(|t| Frame::from_fn(16, 16, |y, x| (x * 9 + y * 5 + t * 3) as u8).unwrap())
        .collect()
}

fn main() {
    let root = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "fuzz/corpus".into()));
    let ring = RingParams::default();
    let params = CodecParams {
        anchor_interval: 3,
        ..CodecParams::default()
    };

    let clip = frames(5);
    put(&root, "raw_clip", "two_groups", &write_raw_clip(&clip).unwrap());

    for (i, g) in encode_sequence(&clip, &params).unwrap().iter().enumerate() {
        put(&root, "sgop", &format!("group{i}"), &g.to_bytes());
    }

    let mut runs = vec![8u8];
    encode_runs([0, 0, 5, -3, 0, 0, 0, 1000, 0, -1].into_iter().chain([0; 22]), &mut runs);
    put(&root, "rle", "mixed", &runs);
    put(&root, "rle", "zeros", &[16]);

    let keys = keygen(&ring, 3).unwrap();
    put(&root, "slwe", "keypair", &keys.to_bytes(&ring));
    put(&root, "slwe", "public", &keys.public.to_bytes(&ring));
    put(&root, "slwe", "secret", &keys.secret.to_bytes(&ring));
    let m = Plaintext::from_bytes(&[0x5A; 32], &ring).unwrap();
    let ct = encrypt(&m, &keys.public, &ring, 9).unwrap();
    put(&root, "slwe", "ciphertext", &ct.to_bytes(&ring));
    let mut packed = Vec::new();
    ct.to_packed(&mut packed);
    put(&root, "ciphertext_packed", "one", &packed);

    let points: Vec<Vec<f64>> = (0..12).map(|i| vec![f64::from(i % 3) * 4.0, f64::from(i) * 0.1]).collect();
    put(&root, "skmn", "three", &fit(&points, 3, 2, 1, 1e-9, 100).unwrap().to_bytes());

    let layout = PoolLayout::memory(
        &[DriveKind::Plain, DriveKind::Plain, DriveKind::Csd],
        64 * 4096,
        4096,
    );
    put(&root, "pool_layout", "three_drives", layout.to_text().as_bytes());

    let mut pool = create_pool(&layout).unwrap();
    let mut staging = Staging::memory();
    let aborting = ArchiveOptions {
        abort_after: Some(1),
        ..ArchiveOptions::default()
    };
    let _ = archive(&clip, &mut pool, &keys.public, &ring, &params, &aborting, &mut staging);
    put(&root, "checkpoint", "after_group1", staging.checkpoint().unwrap());
    let out = archive(&clip, &mut pool, &keys.public, &ring, &params, &ArchiveOptions::default(), &mut staging).unwrap();
    put(&root, "container", "two_segments", &out.container.to_bytes());
    put(&root, "stripe_map", "archive", &out.map.to_bytes());
    put(&root, "segment", "first", out.container.segment(0).unwrap());
    let idle = CheckpointState::new(Stage::Done, 2, 7, [1; 32], Vec::new()).unwrap();
    put(&root, "checkpoint", "done", &save_checkpoint(&idle));

    for s in distribution_scenarios() {
        let mut text = format!("name={}\n", s.name);
        for (site, share) in &s.shares {
            let key = match site {
                Site::Host => "host".to_string(),
                Site::Csd(i) => format!("csd{i}"),
            };
            text.push_str(&format!("share.{key}={share}\n"));
        }
        put(&root, "scenario", &s.name.replace(|c: char| !c.is_ascii_alphanumeric(), "_"), text.as_bytes());
    }
}
