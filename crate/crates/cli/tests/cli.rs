use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const POOL: &str = "stripe_size=16384\n\
drive.0.kind=plain\ndrive.0.capacity=4194304\n\
drive.1.kind=plain\ndrive.1.capacity=4194304\n\
drive.2.kind=plain\ndrive.2.capacity=4194304\n\
drive.3.kind=csd\ndrive.3.capacity=4194304\n";

fn salt(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_salt"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("run salt")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn raw_clip(frames: &[Vec<u8>], w: u16, h: u16) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&w.to_le_bytes());
    out.extend_from_slice(&h.to_le_bytes());
    out.extend_from_slice(&(frames.len() as u32).to_le_bytes());
    for f in frames {
        out.extend_from_slice(f);
    }
    out
}

fn smooth_frames(n: usize) -> Vec<Vec<u8>> {
    (0..n)
        .map(|t| {
            (0..32 * 32)
                .map(|i| {
                    let (y, x) = (i / 32, i % 32);
                    (60 + x + y + t % 3) as u8
                })
                .collect()
        })
        .collect()
}

fn noise_frame(seed: u32) -> Vec<u8> {
    let mut s = seed.wrapping_mul(2_654_435_761) | 1;
    (0..32 * 32)
        .map(|_| {
            s ^= s << 13;
            s ^= s >> 17;
            s ^= s << 5;
            if s & 1 == 0 { 0 } else { 255 }
        })
        .collect()
}

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn new(frames: &[Vec<u8>]) -> Self {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("pool.cfg"), POOL).unwrap();
        std::fs::write(dir.path().join("clip.raw"), raw_clip(frames, 32, 32)).unwrap();
        let ws = Self { dir };
        assert_eq!(code(&ws.run(&["keygen", "--seed", "7", "--out", "k.slwe"])), 0);
        ws
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn run(&self, args: &[&str]) -> Output {
        salt(self.dir.path(), args)
    }

    fn archive(&self, extra: &[&str]) -> Output {
        let mut args = vec![
            "archive", "--in", "clip.raw", "--pool", "pool.cfg", "--key", "k.slwe", "--out", "map.smap",
            "--anchor-interval", "4",
        ];
        args.extend_from_slice(extra);
        self.run(&args)
    }

    fn retrieve(&self) -> Output {
        self.run(&[
            "retrieve", "--in", "map.smap", "--pool", "pool.cfg", "--key", "k.slwe", "--kmax", "4", "--out",
            "back.raw", "--parallel", "3",
        ])
    }
}

#[test]
fn keygen_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["a.slwe", "b.slwe"] {
        assert_eq!(code(&salt(dir.path(), &["keygen", "--seed", "7", "--out", name])), 0);
    }
    let a = std::fs::read(dir.path().join("a.slwe")).unwrap();
    assert_eq!(a, std::fs::read(dir.path().join("b.slwe")).unwrap());
    salt(dir.path(), &["keygen", "--seed", "8", "--out", "c.slwe"]);
    assert_ne!(a, std::fs::read(dir.path().join("c.slwe")).unwrap());
}

#[test]
fn archive_retrieve_with_failures() {
    let frames = smooth_frames(10);
    let ws = Workspace::new(&frames);
    let o = ws.archive(&[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(code(&ws.retrieve()), 0);
    assert_eq!(std::fs::read(ws.path("back.raw")).unwrap(), raw_clip(&frames, 32, 32));
    assert_eq!(code(&ws.run(&["scrub", "--pool", "pool.cfg"])), 0);

    assert_eq!(code(&ws.run(&["fail", "--pool", "pool.cfg", "--drive", "2"])), 0);
    std::fs::remove_file(ws.path("back.raw")).unwrap();
    let o = ws.retrieve();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(std::fs::read(ws.path("back.raw")).unwrap(), raw_clip(&frames, 32, 32));
    assert_eq!(code(&ws.run(&["scrub", "--pool", "pool.cfg"])), 2);

    assert_eq!(code(&ws.run(&["fail", "--pool", "pool.cfg", "--drive", "3"])), 0);
    let o = ws.retrieve();
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("stripe 0"), "{}", stderr(&o));
}

#[test]
fn rebuild_restores_redundancy() {
    let frames = smooth_frames(6);
    let ws = Workspace::new(&frames);
    assert_eq!(code(&ws.archive(&[])), 0);
    let before = std::fs::read(ws.path("drive1.img")).unwrap();
    assert_eq!(code(&ws.run(&["fail", "--pool", "pool.cfg", "--drive", "1"])), 0);
    assert!(!ws.path("drive1.img").exists());
    let o = ws.run(&["rebuild", "--pool", "pool.cfg", "--drive", "1"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(std::fs::read(ws.path("drive1.img")).unwrap(), before);
    assert_eq!(code(&ws.run(&["scrub", "--pool", "pool.cfg"])), 0);
    assert_eq!(code(&ws.run(&["rebuild", "--pool", "pool.cfg", "--drive", "1"])), 1);
    assert_eq!(code(&ws.run(&["fail", "--pool", "pool.cfg", "--drive", "9"])), 1);
}

#[test]
fn usage_errors_leave_pool_untouched() {
    let ws = Workspace::new(&smooth_frames(4));
    for args in [
        vec!["archive", "--in", "missing.raw", "--pool", "pool.cfg", "--key", "k.slwe", "--out", "m"],
        vec!["archive", "--in", "clip.raw", "--pool", "pool.cfg", "--key", "k.slwe", "--out", "m", "--layers", "0"],
        vec!["archive", "--in", "clip.raw", "--pool", "pool.cfg", "--key", "nokey", "--out", "m"],
        vec!["archive", "--in", "clip.raw", "--pool", "pool.cfg", "--key", "k.slwe"],
        vec!["archive", "--in", "clip.raw", "--pool", "pool.cfg", "--key", "k.slwe", "--out", "m", "--base-step", "3"],
        vec!["retrieve", "--in", "m", "--pool", "pool.cfg", "--key", "k.slwe", "--kmax", "1", "--out", "x"],
        vec!["frobnicate"],
    ] {
        let o = ws.run(&args);
        assert_eq!(code(&o), 1, "{args:?}: {}", stderr(&o));
    }
    assert!(!ws.path("pool.cfg.state").exists());
    assert!(!ws.path("drive0.img").exists());
    assert!(!ws.path("m").exists());
}

#[test]
fn bad_data_is_exit_two() {
    let ws = Workspace::new(&smooth_frames(4));
    std::fs::write(ws.path("junk.raw"), [1, 2, 3]).unwrap();
    let o = ws.run(&["archive", "--in", "junk.raw", "--pool", "pool.cfg", "--key", "k.slwe", "--out", "m"]);
    assert_eq!(code(&o), 2);
    assert_eq!(code(&ws.archive(&[])), 0);
    let mut map = std::fs::read(ws.path("map.smap")).unwrap();
    map[0] ^= 0xFF;
    std::fs::write(ws.path("bad.smap"), map).unwrap();
    let o = ws.run(&["retrieve", "--in", "bad.smap", "--pool", "pool.cfg", "--key", "k.slwe", "--kmax", "4", "--out", "x"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn interrupted_archive_resumes_to_identical_drives() {
    let frames = smooth_frames(10);
    let reference = Workspace::new(&frames);
    assert_eq!(code(&reference.archive(&[])), 0);
    let ws = Workspace::new(&frames);
    let o = ws.archive(&["--abort-after", "2"]);
    assert_eq!(code(&o), 3);
    assert!(!ws.path("map.smap").exists());
    assert!(ws.path("map.smap.staging/checkpoint.bin").exists());
    let o = ws.archive(&[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("resumed after 2 groups"));
    for f in ["map.smap", "drive0.img", "drive1.img", "drive2.img", "drive3.img"] {
        assert_eq!(
            std::fs::read(ws.path(f)).unwrap(),
            std::fs::read(reference.path(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn exemplar_fit_and_select() {
    let train = smooth_frames(8);
    let mut clip = smooth_frames(8);
    clip[5] = noise_frame(3);
    let ws = Workspace::new(&clip);
    std::fs::write(ws.path("train.raw"), raw_clip(&train, 32, 32)).unwrap();
    let o = ws.run(&["exemplar", "fit", "--in", "train.raw", "--out", "m.skmn", "--clusters", "2"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(code(&ws.archive(&[])), 0);
    let o = ws.run(&[
        "exemplar", "select", "--in", "map.smap", "--pool", "pool.cfg", "--key", "k.slwe", "--kmax", "4",
        "--model", "m.skmn", "--out", "ex.raw",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("frame 5: novel"), "{out}");
    assert!(out.contains("exemplars: [5]"), "{out}");
    assert_eq!(std::fs::read(ws.path("ex.raw")).unwrap(), raw_clip(&clip[5..6], 32, 32));
}

#[test]
fn model_and_bench_reports() {
    let dir = tempfile::tempdir().unwrap();
    let o = salt(dir.path(), &["model"]);
    assert_eq!(code(&o), 0);
    let table = stdout(&o);
    assert_eq!(table.lines().count(), 7);
    assert!(table.starts_with("scenario,latency_s,speedup\nhost,"));
    std::fs::write(dir.path().join("s.cfg"), "name=mine\nshare.csd1=0.5\nshare.csd2=0.5\n").unwrap();
    std::fs::write(dir.path().join("bad.cfg"), "share.csd1=0.5\n").unwrap();
    let o = salt(dir.path(), &["model", "--scenario", "s.cfg"]);
    assert!(stdout(&o).contains("mine,"));
    assert_eq!(code(&salt(dir.path(), &["model", "--scenario", "bad.cfg"])), 2);
    let o = salt(dir.path(), &["bench", "--iterations", "2"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("117.32 TiB/day"));
    assert!(stdout(&o).contains("hspm_multiply,2,"));
}
