use super::StorageError;
use std::fs::{File, OpenOptions};
use std::os::unix::fs::FileExt;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Mutex, RwLock};

/// Size of one addressable block.
pub const BLOCK_BYTES: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DriveKind {
    Plain,
    Csd,
}

impl DriveKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DriveKind::Plain => "plain",
            DriveKind::Csd => "csd",
        }
    }
}

#[derive(Debug)]
enum Store {
    /// Grows on write; unwritten bytes read as zero.
    Memory(RwLock<Vec<u8>>),
    File { path: PathBuf, file: RwLock<Option<File>> },
}

/// A block store with a failure flag and I/O counters.
#[derive(Debug)]
pub struct Drive {
    id: u32,
    kind: DriveKind,
    capacity: u64,
    store: Store,
    failed: AtomicBool,
    bytes_read: AtomicU64,
    bytes_written: AtomicU64,
    /// Compute-local buffer of a CSD, filled by peer-to-peer transfers.
    local: Mutex<Vec<u8>>,
}

fn open_file(path: &Path, create: bool, capacity: u64) -> std::io::Result<File> {
    let file = OpenOptions::new()
        .read(true)
        .write(true)
        .create(create)
        .truncate(create)
        .open(path)?;
    if create {
        file.set_len(capacity)?;
    }
    Ok(file)
}

impl Drive {
    pub(crate) fn memory(id: u32, kind: DriveKind, capacity: u64) -> Self {
        Self::with_store(id, kind, capacity, Store::Memory(RwLock::new(Vec::new())))
    }

    /// Creates (and zeroes) the backing file.
    pub(crate) fn create_file(id: u32, kind: DriveKind, capacity: u64, path: PathBuf) -> Result<Self, StorageError> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let file = open_file(&path, true, capacity)?;
        Ok(Self::with_store(
            id,
            kind,
            capacity,
            Store::File {
                path,
                file: RwLock::new(Some(file)),
            },
        ))
    }

    /// Opens an existing backing file; a missing file yields a failed drive.
    pub(crate) fn open_file(id: u32, kind: DriveKind, capacity: u64, path: PathBuf) -> Result<Self, StorageError> {
        let file = match open_file(&path, false, capacity) {
            Ok(f) => Some(f),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
            Err(e) => return Err(e.into()),
        };
        let failed = file.is_none();
        let d = Self::with_store(
            id,
            kind,
            capacity,
            Store::File {
                path,
                file: RwLock::new(file),
            },
        );
        d.failed.store(failed, Ordering::SeqCst);
        Ok(d)
    }

    fn with_store(id: u32, kind: DriveKind, capacity: u64, store: Store) -> Self {
        Self {
            id,
            kind,
            capacity,
            store,
            failed: AtomicBool::new(false),
            bytes_read: AtomicU64::new(0),
            bytes_written: AtomicU64::new(0),
            local: Mutex::new(Vec::new()),
        }
    }

    pub fn id(&self) -> u32 {
        self.id
    }

    pub fn kind(&self) -> DriveKind {
        self.kind
    }

    pub fn capacity(&self) -> u64 {
        self.capacity
    }

    pub fn path(&self) -> Option<&Path> {
        match &self.store {
            Store::Memory(_) => None,
            Store::File { path, .. } => Some(path),
        }
    }

    pub fn is_failed(&self) -> bool {
        self.failed.load(Ordering::SeqCst)
    }

    pub fn bytes_read(&self) -> u64 {
        self.bytes_read.load(Ordering::Relaxed)
    }

    pub fn bytes_written(&self) -> u64 {
        self.bytes_written.load(Ordering::Relaxed)
    }

    fn check_range(&self, offset: u64, len: usize) -> Result<(), StorageError> {
        if self.is_failed() {
            return Err(StorageError::DriveFailed(self.id));
        }
        match offset.checked_add(len as u64) {
            Some(end) if end <= self.capacity => Ok(()),
            _ => Err(StorageError::InvalidInput(format!(
                "access of {len} bytes at {offset} beyond drive {} capacity {}",
                self.id, self.capacity
            ))),
        }
    }

    pub fn read_at(&self, offset: u64, buf: &mut [u8]) -> Result<(), StorageError> {
        self.check_range(offset, buf.len())?;
        match &self.store {
            Store::Memory(m) => {
                let data = m.read().expect("drive lock");
                let start = (offset as usize).min(data.len());
                let end = (offset as usize + buf.len()).min(data.len());
                buf[..end - start].copy_from_slice(&data[start..end]);
                buf[end - start..].fill(0);
            }
            Store::File { file, .. } => {
                let guard = file.read().expect("drive lock");
                let f = guard.as_ref().ok_or(StorageError::DriveFailed(self.id))?;
                f.read_exact_at(buf, offset)?;
            }
        }
        self.bytes_read.fetch_add(buf.len() as u64, Ordering::Relaxed);
        Ok(())
    }

    pub fn write_at(&self, offset: u64, data: &[u8]) -> Result<(), StorageError> {
        self.check_range(offset, data.len())?;
        match &self.store {
            Store::Memory(m) => {
                let mut v = m.write().expect("drive lock");
                let end = offset as usize + data.len();
                if v.len() < end {
                    v.resize(end, 0);
                }
                v[offset as usize..end].copy_from_slice(data);
            }
            Store::File { file, .. } => {
                let guard = file.read().expect("drive lock");
                let f = guard.as_ref().ok_or(StorageError::DriveFailed(self.id))?;
                f.write_all_at(data, offset)?;
            }
        }
        self.bytes_written.fetch_add(data.len() as u64, Ordering::Relaxed);
        Ok(())
    }

    pub fn read_block(&self, block: u64) -> Result<Vec<u8>, StorageError> {
        let mut buf = vec![0u8; BLOCK_BYTES];
        let offset = block
            .checked_mul(BLOCK_BYTES as u64)
            .ok_or_else(|| StorageError::InvalidInput(format!("block {block} out of range")))?;
        self.read_at(offset, &mut buf)?;
        Ok(buf)
    }

    /// Simulates removal: contents are lost and a file-backed drive's
    /// backing file is deleted.
    pub fn fail(&self) -> Result<(), StorageError> {
        self.failed.store(true, Ordering::SeqCst);
        match &self.store {
            Store::Memory(m) => {
                let mut v = m.write().expect("drive lock");
                v.clear();
                v.shrink_to_fit();
            }
            Store::File { path, file } => {
                file.write().expect("drive lock").take();
                match std::fs::remove_file(path) {
                    Ok(()) => {}
                    Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
                    Err(e) => return Err(e.into()),
                }
            }
        }
        Ok(())
    }

    /// Installs an empty replacement and clears the failure flag.
    pub(crate) fn replace(&self) -> Result<(), StorageError> {
        match &self.store {
            Store::Memory(m) => m.write().expect("drive lock").clear(),
            Store::File { path, file } => {
                *file.write().expect("drive lock") = Some(open_file(path, true, self.capacity)?);
            }
        }
        self.failed.store(false, Ordering::SeqCst);
        Ok(())
    }

    pub(crate) fn push_local(&self, data: &[u8]) {
        self.local.lock().expect("local buffer").extend_from_slice(data);
    }

    /// Bytes received into the compute-local buffer.
    pub fn local_buffer(&self) -> Vec<u8> {
        self.local.lock().expect("local buffer").clone()
    }

    pub fn clear_local(&self) {
        self.local.lock().expect("local buffer").clear();
    }
}
