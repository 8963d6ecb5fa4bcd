//! Pool layout files and the drive pool.
//!
//! Layout files are `key=value` lines; `#` starts a comment.
//!
//! ```text
//! stripe_size=65536          # bytes per chunk, a multiple of 4096
//! backing=file               # file (default) or memory
//! drive.0.kind=plain         # plain or csd
//! drive.0.capacity=16777216  # bytes, a multiple of 4096
//! drive.0.path=d0.img        # optional; defaults to drive<id>.img
//! ```
//!
//! Relative paths resolve against the layout file's directory. A
//! file-backed pool keeps its stripe cursor in `<layout>.state`.

use super::drive::{Drive, DriveKind, BLOCK_BYTES};
use super::StorageError;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub const DEFAULT_STRIPE_SIZE: u32 = 64 * 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backing {
    Memory,
    File,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DriveSpec {
    pub id: u32,
    pub kind: DriveKind,
    pub capacity: u64,
    pub path: Option<PathBuf>,
}

/// Kind, capacity and path as they accumulate while parsing.
type PartialDrive = (Option<DriveKind>, Option<u64>, Option<PathBuf>);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoolLayout {
    pub stripe_size: u32,
    pub backing: Backing,
    /// Sorted by id.
    pub drives: Vec<DriveSpec>,
    pub base_dir: PathBuf,
    pub state_path: Option<PathBuf>,
}

fn bad(msg: impl Into<String>) -> StorageError {
    StorageError::InvalidInput(msg.into())
}

impl PoolLayout {
    /// In-memory layout with `kinds.len()` drives numbered from 0.
    pub fn memory(kinds: &[DriveKind], capacity: u64, stripe_size: u32) -> Self {
        Self {
            stripe_size,
            backing: Backing::Memory,
            drives: kinds
                .iter()
                .enumerate()
                .map(|(i, &kind)| DriveSpec {
                    id: i as u32,
                    kind,
                    capacity,
                    path: None,
                })
                .collect(),
            base_dir: PathBuf::new(),
            state_path: None,
        }
    }

    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, StorageError> {
        let mut stripe_size = DEFAULT_STRIPE_SIZE;
        let mut backing = Backing::File;
        let mut drives: BTreeMap<u32, PartialDrive> = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| bad(format!("line {}: expected key=value", lineno + 1)))?;
            let at = |m: &str| bad(format!("line {}: {m}", lineno + 1));
            match key {
                "stripe_size" => stripe_size = value.parse().map_err(|_| at("bad stripe_size"))?,
                "backing" => {
                    backing = match value {
                        "file" => Backing::File,
                        "memory" => Backing::Memory,
                        _ => return Err(at("backing must be file or memory")),
                    }
                }
                _ => {
                    let mut parts = key.splitn(3, '.');
                    let (Some("drive"), Some(id), Some(field)) = (parts.next(), parts.next(), parts.next()) else {
                        return Err(at(&format!("unknown key {key:?}")));
                    };
                    let id: u32 = id.parse().map_err(|_| at("bad drive id"))?;
                    let entry = drives.entry(id).or_default();
                    let dup = |set: bool| if set { Err(at(&format!("duplicate {key}"))) } else { Ok(()) };
                    match field {
                        "kind" => {
                            dup(entry.0.is_some())?;
                            entry.0 = Some(match value {
                                "plain" => DriveKind::Plain,
                                "csd" => DriveKind::Csd,
                                _ => return Err(at("kind must be plain or csd")),
                            });
                        }
                        "capacity" => {
                            dup(entry.1.is_some())?;
                            entry.1 = Some(value.parse().map_err(|_| at("bad capacity"))?);
                        }
                        "path" => {
                            dup(entry.2.is_some())?;
                            if value.is_empty() {
                                return Err(at("empty path"));
                            }
                            entry.2 = Some(PathBuf::from(value));
                        }
                        _ => return Err(at(&format!("unknown drive field {field:?}"))),
                    }
                }
            }
        }
        let drives = drives
            .into_iter()
            .map(|(id, (kind, capacity, path))| {
                Ok(DriveSpec {
                    id,
                    kind: kind.ok_or_else(|| bad(format!("drive {id} has no kind")))?,
                    capacity: capacity.ok_or_else(|| bad(format!("drive {id} has no capacity")))?,
                    path,
                })
            })
            .collect::<Result<Vec<_>, StorageError>>()?;
        let layout = Self {
            stripe_size,
            backing,
            drives,
            base_dir: base_dir.to_path_buf(),
            state_path: None,
        };
        layout.validate()?;
        Ok(layout)
    }

    pub fn load(path: &Path) -> Result<Self, StorageError> {
        let text = std::fs::read_to_string(path)?;
        let base = path.parent().unwrap_or(Path::new(""));
        let mut layout = Self::parse(&text, base)?;
        if layout.backing == Backing::File {
            let mut state = path.as_os_str().to_owned();
            state.push(".state");
            layout.state_path = Some(PathBuf::from(state));
        }
        Ok(layout)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "stripe_size={}\nbacking={}\n",
            self.stripe_size,
            match self.backing {
                Backing::File => "file",
                Backing::Memory => "memory",
            }
        );
        for d in &self.drives {
            out.push_str(&format!("drive.{}.kind={}\n", d.id, d.kind.as_str()));
            out.push_str(&format!("drive.{}.capacity={}\n", d.id, d.capacity));
            if let Some(p) = &d.path {
                out.push_str(&format!("drive.{}.path={}\n", d.id, p.display()));
            }
        }
        out
    }

    pub fn validate(&self) -> Result<(), StorageError> {
        if self.drives.len() < 3 {
            return Err(bad(format!("RAID-5 needs at least 3 drives, layout has {}", self.drives.len())));
        }
        if self.drives.len() > u8::MAX as usize {
            return Err(bad("too many drives"));
        }
        if self.stripe_size == 0 || !(self.stripe_size as usize).is_multiple_of(BLOCK_BYTES) {
            return Err(bad(format!("stripe size {} is not a positive multiple of {BLOCK_BYTES}", self.stripe_size)));
        }
        let mut ids: Vec<u32> = self.drives.iter().map(|d| d.id).collect();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != self.drives.len() {
            return Err(bad("duplicate drive ids"));
        }
        for d in &self.drives {
            if d.capacity == 0 || d.capacity % BLOCK_BYTES as u64 != 0 {
                return Err(bad(format!("drive {} capacity {} is not a positive multiple of {BLOCK_BYTES}", d.id, d.capacity)));
            }
        }
        Ok(())
    }

    fn drive_path(&self, d: &DriveSpec) -> PathBuf {
        let p = d.path.clone().unwrap_or_else(|| PathBuf::from(format!("drive{}.img", d.id)));
        if p.is_absolute() {
            p
        } else {
            self.base_dir.join(p)
        }
    }
}

/// Drives in id order plus the stripe allocation cursor.
#[derive(Debug)]
pub struct DrivePool {
    drives: Vec<Drive>,
    stripe_size: u32,
    next_stripe: u64,
    state_path: Option<PathBuf>,
}

pub fn create_pool(layout: &PoolLayout) -> Result<DrivePool, StorageError> {
    DrivePool::create(layout)
}

impl DrivePool {
    /// Builds a fresh, zeroed pool.
    pub fn create(layout: &PoolLayout) -> Result<Self, StorageError> {
        layout.validate()?;
        let mut drives = layout.drives.clone();
        drives.sort_by_key(|d| d.id);
        let drives = drives
            .iter()
            .map(|d| match layout.backing {
                Backing::Memory => Ok(Drive::memory(d.id, d.kind, d.capacity)),
                Backing::File => Drive::create_file(d.id, d.kind, d.capacity, layout.drive_path(d)),
            })
            .collect::<Result<Vec<_>, _>>()?;
        let pool = Self {
            drives,
            stripe_size: layout.stripe_size,
            next_stripe: 0,
            state_path: layout.state_path.clone(),
        };
        pool.save_state()?;
        Ok(pool)
    }

    /// Reopens a file-backed pool. Missing backing files come back as
    /// failed drives.
    pub fn open(layout: &PoolLayout) -> Result<Self, StorageError> {
        layout.validate()?;
        if layout.backing != Backing::File {
            return Err(bad("only file-backed pools can be reopened"));
        }
        let mut specs = layout.drives.clone();
        specs.sort_by_key(|d| d.id);
        let drives = specs
            .iter()
            .map(|d| Drive::open_file(d.id, d.kind, d.capacity, layout.drive_path(d)))
            .collect::<Result<Vec<_>, _>>()?;
        let next_stripe = match &layout.state_path {
            Some(p) => {
                let text = std::fs::read_to_string(p)?;
                text.trim()
                    .strip_prefix("next_stripe=")
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| StorageError::Decode(format!("bad pool state file {}", p.display())))?
            }
            None => 0,
        };
        Ok(Self {
            drives,
            stripe_size: layout.stripe_size,
            next_stripe,
            state_path: layout.state_path.clone(),
        })
    }

    /// Opens the pool if its state file exists, otherwise creates it.
    pub fn open_or_create(layout: &PoolLayout) -> Result<Self, StorageError> {
        match &layout.state_path {
            Some(p) if p.exists() => Self::open(layout),
            _ => Self::create(layout),
        }
    }

    pub(crate) fn save_state(&self) -> Result<(), StorageError> {
        if let Some(p) = &self.state_path {
            let tmp = p.with_extension("state.tmp");
            std::fs::write(&tmp, format!("next_stripe={}\n", self.next_stripe))?;
            std::fs::rename(tmp, p)?;
        }
        Ok(())
    }

    pub fn drives(&self) -> &[Drive] {
        &self.drives
    }

    pub fn drive_count(&self) -> usize {
        self.drives.len()
    }

    pub fn stripe_size(&self) -> u32 {
        self.stripe_size
    }

    pub fn next_stripe(&self) -> u64 {
        self.next_stripe
    }

    pub(crate) fn advance(&mut self, stripes: u64) -> Result<(), StorageError> {
        self.next_stripe += stripes;
        self.save_state()
    }

    /// Stripes that fit on the smallest drive.
    pub fn stripe_capacity(&self) -> u64 {
        let min = self.drives.iter().map(Drive::capacity).min().unwrap_or(0);
        min / u64::from(self.stripe_size)
    }

    pub fn position(&self, id: u32) -> Result<usize, StorageError> {
        self.drives
            .iter()
            .position(|d| d.id() == id)
            .ok_or_else(|| bad(format!("no drive with id {id}")))
    }

    pub fn drive(&self, id: u32) -> Result<&Drive, StorageError> {
        Ok(&self.drives[self.position(id)?])
    }

    pub fn failed_drives(&self) -> Vec<u32> {
        self.drives.iter().filter(|d| d.is_failed()).map(Drive::id).collect()
    }

    pub fn fail_drive(&self, id: u32) -> Result<(), StorageError> {
        self.drive(id)?.fail()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "stripe_size=65536\nbacking=memory\n# three plain, one csd\n\
        drive.0.kind=plain\ndrive.0.capacity=1048576\n\
        drive.1.kind=plain\ndrive.1.capacity=1048576\n\
        drive.2.kind=plain\ndrive.2.capacity=1048576\n\
        drive.3.kind=csd\ndrive.3.capacity=1048576\n";

    #[test]
    fn parses_and_builds_pool() {
        let layout = PoolLayout::parse(SAMPLE, Path::new("")).unwrap();
        assert_eq!(layout.drives.len(), 4);
        assert_eq!(layout.drives[3].kind, DriveKind::Csd);
        let pool = create_pool(&layout).unwrap();
        assert_eq!(pool.stripe_capacity(), 16);
        assert_eq!(PoolLayout::parse(&layout.to_text(), Path::new("")).unwrap(), layout);
    }

    #[test]
    fn rejects_bad_layouts() {
        let two = "backing=memory\ndrive.0.kind=plain\ndrive.0.capacity=4096\ndrive.1.kind=plain\ndrive.1.capacity=4096\n";
        assert!(PoolLayout::parse(two, Path::new("")).is_err());
        let dup = SAMPLE.replace("drive.1.kind=plain", "drive.1.kind=plain\ndrive.1.kind=csd");
        assert!(PoolLayout::parse(&dup, Path::new("")).is_err());
        assert!(PoolLayout::parse(&SAMPLE.replace("65536", "1000"), Path::new("")).is_err());
        assert!(PoolLayout::parse(&SAMPLE.replace("csd", "ssd"), Path::new("")).is_err());
        assert!(PoolLayout::parse("nonsense", Path::new("")).is_err());
        assert!(PoolLayout::parse(&format!("{SAMPLE}drive.4.kind=plain\n"), Path::new("")).is_err());
        let mut layout = PoolLayout::memory(&[DriveKind::Plain; 3], 4096, 4096);
        layout.drives[2].id = 0;
        assert!(create_pool(&layout).is_err());
    }

    #[test]
    fn file_pool_reopens_with_contents() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("pool.cfg");
        std::fs::write(&cfg, SAMPLE.replace("backing=memory", "backing=file")).unwrap();
        let layout = PoolLayout::load(&cfg).unwrap();
        let mut pool = DrivePool::create(&layout).unwrap();
        pool.drive(2).unwrap().write_at(100, b"persist").unwrap();
        pool.advance(3).unwrap();
        drop(pool);
        let pool = DrivePool::open(&layout).unwrap();
        let mut buf = [0u8; 7];
        pool.drive(2).unwrap().read_at(100, &mut buf).unwrap();
        assert_eq!(&buf, b"persist");
        assert_eq!(pool.next_stripe(), 3);
        pool.fail_drive(1).unwrap();
        let pool = DrivePool::open(&layout).unwrap();
        assert_eq!(pool.failed_drives(), vec![1]);
    }
}
