//! Single-file dataset container and its JSON manifest sidecar.
//!
//! ```text
//! "SYNDCT01"                 8 bytes
//! header_len                 u32 little-endian
//! header                     UTF-8 JSON, header_len bytes
//! inputs                     count × ∏input_shape × dtype size
//! targets                    count × ∏target_shape × dtype size
//! ```
//!
//! Tensors are little-endian and row-major. The manifest `<file>.manifest.json`
//! repeats the header and adds the SHA-256 of the payload.

use std::fs::{File, OpenOptions};
use std::io::{self, BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::rng::Split;
use crate::scene::{SamplerConfig, GLYPH_LIBRARY_VERSION};
use crate::tasks::TaskSample;
use crate::tensor::{numel, DType, Tensor};

pub const MAGIC: &[u8; 8] = b"SYNDCT01";
pub const FORMAT_VERSION: u32 = 1;
pub const GENERATOR_VERSION: &str = env!("CARGO_PKG_VERSION");

const PREAMBLE_LEN: u64 = 12;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("bad magic: expected SYNDCT01, found {found:?}")]
    BadMagic { found: Vec<u8> },
    #[error("truncated file: expected {expected} bytes, found {actual}")]
    Truncated { expected: u64, actual: u64 },
    #[error("unexpected trailing bytes: expected {expected} bytes, found {actual}")]
    TrailingBytes { expected: u64, actual: u64 },
    #[error("bad header: {0}")]
    BadHeader(String),
    #[error("checksum mismatch: manifest says {expected}, payload hashes to {actual}")]
    ChecksumMismatch { expected: String, actual: String },
    #[error("sample {index}: {detail}")]
    ShapeMismatch { index: u64, detail: String },
    #[error("header promises {expected} samples, {actual} were written")]
    CountMismatch { expected: u64, actual: u64 },
    #[error("sample index {index} out of range for {count} samples")]
    IndexOutOfRange { index: u64, count: u64 },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub format_version: u32,
    pub task: String,
    pub split: Option<Split>,
    pub count: u64,
    pub input_shape: Vec<usize>,
    pub input_dtype: DType,
    pub target_shape: Vec<usize>,
    pub target_dtype: DType,
    pub master_seed: Option<u64>,
    pub glyph_library_version: String,
    pub sampler_config: Option<SamplerConfig>,
    pub generator_version: String,
}

impl DatasetHeader {
    pub fn new(
        task: impl Into<String>,
        count: u64,
        input_shape: Vec<usize>,
        input_dtype: DType,
        target_shape: Vec<usize>,
        target_dtype: DType,
    ) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            task: task.into(),
            split: None,
            count,
            input_shape,
            input_dtype,
            target_shape,
            target_dtype,
            master_seed: None,
            glyph_library_version: GLYPH_LIBRARY_VERSION.to_owned(),
            sampler_config: None,
            generator_version: GENERATOR_VERSION.to_owned(),
        }
    }

    pub fn with_provenance(mut self, split: Split, master_seed: u64, cfg: SamplerConfig) -> Self {
        self.split = Some(split);
        self.master_seed = Some(master_seed);
        self.sampler_config = Some(cfg);
        self
    }

    pub fn input_bytes(&self) -> u64 {
        (numel(&self.input_shape) * self.input_dtype.size()) as u64
    }

    pub fn target_bytes(&self) -> u64 {
        (numel(&self.target_shape) * self.target_dtype.size()) as u64
    }

    pub fn payload_len(&self) -> u64 {
        self.count * (self.input_bytes() + self.target_bytes())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("header serializes")
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, StoreError> {
        let header: Self =
            serde_json::from_slice(bytes).map_err(|e| StoreError::BadHeader(e.to_string()))?;
        if header.format_version != FORMAT_VERSION {
            return Err(StoreError::BadHeader(format!(
                "unsupported format version {}",
                header.format_version
            )));
        }
        Ok(header)
    }

    fn check(&self, index: u64, sample: &TaskSample) -> Result<(), StoreError> {
        for (what, t, shape, dtype) in [
            ("input", &sample.input, &self.input_shape, self.input_dtype),
            (
                "target",
                &sample.target,
                &self.target_shape,
                self.target_dtype,
            ),
        ] {
            if &t.shape != shape || t.dtype() != dtype {
                return Err(StoreError::ShapeMismatch {
                    index,
                    detail: format!(
                        "{what} is {:?} {:?}, header says {:?} {:?}",
                        t.dtype(),
                        t.shape,
                        dtype,
                        shape
                    ),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    #[serde(flatten)]
    pub header: DatasetHeader,
    pub payload_sha256: String,
    pub created_unix: u64,
}

impl Manifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        let bytes = std::fs::read(path)?;
        serde_json::from_slice(&bytes).map_err(|e| StoreError::BadHeader(format!("manifest: {e}")))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), StoreError> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }
}

/// Sidecar manifest path: `<dataset>.manifest.json`.
pub fn manifest_path(dataset: &Path) -> PathBuf {
    let mut name = dataset.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

/// Preview directory: `<dataset>.preview/`.
pub fn preview_dir(dataset: &Path) -> PathBuf {
    let mut name = dataset.as_os_str().to_owned();
    name.push(".preview");
    PathBuf::from(name)
}

/// Streams samples into a dataset file. Inputs and targets are written
/// through separate handles into their regions of a preallocated file.
pub struct DatasetWriter {
    path: PathBuf,
    header: DatasetHeader,
    payload_start: u64,
    inputs: BufWriter<File>,
    targets: BufWriter<File>,
    written: u64,
}

impl DatasetWriter {
    pub fn create(path: impl AsRef<Path>, header: DatasetHeader) -> Result<Self, StoreError> {
        let path = path.as_ref().to_path_buf();
        let header_bytes = header.to_bytes();
        let header_len = u32::try_from(header_bytes.len())
            .map_err(|_| StoreError::BadHeader("header longer than 4 GiB".into()))?;
        let payload_start = PREAMBLE_LEN + header_len as u64;

        let mut file = File::create(&path)?;
        file.write_all(MAGIC)?;
        file.write_all(&header_len.to_le_bytes())?;
        file.write_all(&header_bytes)?;
        file.set_len(payload_start + header.payload_len())?;

        let mut targets = OpenOptions::new().write(true).open(&path)?;
        targets.seek(SeekFrom::Start(
            payload_start + header.count * header.input_bytes(),
        ))?;

        Ok(Self {
            path,
            header,
            payload_start,
            inputs: BufWriter::new(file),
            targets: BufWriter::new(targets),
            written: 0,
        })
    }

    pub fn header(&self) -> &DatasetHeader {
        &self.header
    }

    pub fn push(&mut self, sample: &TaskSample) -> Result<(), StoreError> {
        if self.written == self.header.count {
            return Err(StoreError::CountMismatch {
                expected: self.header.count,
                actual: self.written + 1,
            });
        }
        self.header.check(self.written, sample)?;
        sample.input.write_le(&mut self.inputs)?;
        sample.target.write_le(&mut self.targets)?;
        self.written += 1;
        Ok(())
    }

    /// Flushes, hashes the payload and writes the manifest.
    pub fn finish(mut self) -> Result<Manifest, StoreError> {
        if self.written != self.header.count {
            return Err(StoreError::CountMismatch {
                expected: self.header.count,
                actual: self.written,
            });
        }
        self.inputs.flush()?;
        self.targets.flush()?;
        self.inputs.get_ref().sync_all()?;
        self.targets.get_ref().sync_all()?;
        drop(self.targets);

        let payload_sha256 =
            hash_payload(&self.path, self.payload_start, self.header.payload_len())?;
        let created_unix = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let manifest = Manifest {
            header: self.header,
            payload_sha256,
            created_unix,
        };
        manifest.save(manifest_path(&self.path))?;
        Ok(manifest)
    }
}

/// Writes every sample of `samples` (in order) and the manifest.
pub fn write_dataset<'a>(
    path: impl AsRef<Path>,
    header: DatasetHeader,
    samples: impl IntoIterator<Item = &'a TaskSample>,
) -> Result<Manifest, StoreError> {
    let mut writer = DatasetWriter::create(path, header)?;
    for s in samples {
        writer.push(s)?;
    }
    writer.finish()
}

fn hash_payload(path: &Path, start: u64, len: u64) -> Result<String, StoreError> {
    let mut file = File::open(path)?;
    file.seek(SeekFrom::Start(start))?;
    let mut reader = BufReader::new(file).take(len);
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    let mut seen = 0u64;
    loop {
        let n = reader.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
        seen += n as u64;
    }
    if seen != len {
        return Err(StoreError::Truncated {
            expected: start + len,
            actual: start + seen,
        });
    }
    Ok(hex::encode(hasher.finalize()))
}

/// Read access to a dataset file. Samples are streamed from disk.
#[derive(Debug, Clone)]
pub struct DatasetReader {
    path: PathBuf,
    header: DatasetHeader,
    payload_start: u64,
}

impl DatasetReader {
    /// Validates magic, header and file length.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        let path = path.as_ref().to_path_buf();
        let mut file = File::open(&path)?;
        let actual = file.metadata()?.len();

        let mut magic = [0u8; 8];
        let got = read_up_to(&mut file, &mut magic)?;
        if got < magic.len() || &magic != MAGIC {
            return Err(StoreError::BadMagic {
                found: magic[..got].to_vec(),
            });
        }
        let mut len_bytes = [0u8; 4];
        if read_up_to(&mut file, &mut len_bytes)? < 4 {
            return Err(StoreError::Truncated {
                expected: PREAMBLE_LEN,
                actual,
            });
        }
        let header_len = u32::from_le_bytes(len_bytes) as u64;
        let payload_start = PREAMBLE_LEN + header_len;
        if actual < payload_start {
            return Err(StoreError::Truncated {
                expected: payload_start,
                actual,
            });
        }
        let mut header_bytes = vec![0u8; header_len as usize];
        file.read_exact(&mut header_bytes)?;
        let header = DatasetHeader::from_bytes(&header_bytes)?;

        let expected = payload_start + header.payload_len();
        if actual < expected {
            return Err(StoreError::Truncated { expected, actual });
        }
        if actual > expected {
            return Err(StoreError::TrailingBytes { expected, actual });
        }
        Ok(Self {
            path,
            header,
            payload_start,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn header(&self) -> &DatasetHeader {
        &self.header
    }

    pub fn len(&self) -> u64 {
        self.header.count
    }

    pub fn is_empty(&self) -> bool {
        self.header.count == 0
    }

    fn input_offset(&self, index: u64) -> u64 {
        self.payload_start + index * self.header.input_bytes()
    }

    fn target_offset(&self, index: u64) -> u64 {
        self.payload_start
            + self.header.count * self.header.input_bytes()
            + index * self.header.target_bytes()
    }

    /// Random access to one sample.
    pub fn sample(&self, index: u64) -> Result<TaskSample, StoreError> {
        if index >= self.header.count {
            return Err(StoreError::IndexOutOfRange {
                index,
                count: self.header.count,
            });
        }
        let mut file = File::open(&self.path)?;
        file.seek(SeekFrom::Start(self.input_offset(index)))?;
        let input = Tensor::read_le(&mut file, &self.header.input_shape, self.header.input_dtype)?;
        file.seek(SeekFrom::Start(self.target_offset(index)))?;
        let target = Tensor::read_le(
            &mut file,
            &self.header.target_shape,
            self.header.target_dtype,
        )?;
        Ok(TaskSample {
            index,
            input,
            target,
        })
    }

    /// Streams every sample in index order.
    pub fn samples(&self) -> Result<SampleIter, StoreError> {
        let mut inputs = File::open(&self.path)?;
        inputs.seek(SeekFrom::Start(self.input_offset(0)))?;
        let mut targets = File::open(&self.path)?;
        targets.seek(SeekFrom::Start(self.target_offset(0)))?;
        Ok(SampleIter {
            header: self.header.clone(),
            inputs: BufReader::new(inputs),
            targets: BufReader::new(targets),
            next: 0,
        })
    }

    pub fn payload_sha256(&self) -> Result<String, StoreError> {
        hash_payload(&self.path, self.payload_start, self.header.payload_len())
    }

    /// Compares the payload hash against `expected` (hex).
    pub fn verify_checksum(&self, expected: &str) -> Result<(), StoreError> {
        let actual = self.payload_sha256()?;
        if actual.eq_ignore_ascii_case(expected) {
            Ok(())
        } else {
            Err(StoreError::ChecksumMismatch {
                expected: expected.to_owned(),
                actual,
            })
        }
    }

    /// Loads the sidecar manifest and checks header and checksum against it.
    pub fn verify_manifest(&self) -> Result<Manifest, StoreError> {
        let manifest = Manifest::load(manifest_path(&self.path))?;
        if manifest.header != self.header {
            return Err(StoreError::BadHeader(
                "manifest header differs from file header".into(),
            ));
        }
        self.verify_checksum(&manifest.payload_sha256)?;
        Ok(manifest)
    }
}

fn read_up_to(r: &mut impl Read, buf: &mut [u8]) -> io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..])? {
            0 => break,
            n => filled += n,
        }
    }
    Ok(filled)
}

pub struct SampleIter {
    header: DatasetHeader,
    inputs: BufReader<File>,
    targets: BufReader<File>,
    next: u64,
}

impl Iterator for SampleIter {
    type Item = Result<TaskSample, StoreError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.next >= self.header.count {
            return None;
        }
        let index = self.next;
        self.next += 1;
        let h = &self.header;
        let mut read = || -> Result<TaskSample, StoreError> {
            Ok(TaskSample {
                index,
                input: Tensor::read_le(&mut self.inputs, &h.input_shape, h.input_dtype)?,
                target: Tensor::read_le(&mut self.targets, &h.target_shape, h.target_dtype)?,
            })
        };
        Some(read())
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.header.count - self.next) as usize;
        (left, Some(left))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header(count: u64) -> DatasetHeader {
        DatasetHeader::new(
            "im_to_class",
            count,
            vec![2, 3],
            DType::F32,
            vec![],
            DType::U32,
        )
    }

    fn samples(n: u64) -> Vec<TaskSample> {
        (0..n)
            .map(|i| TaskSample {
                index: i,
                input: Tensor::f32(
                    vec![2, 3],
                    (0..6).map(|k| (i * 6 + k) as f32 * 0.5).collect(),
                ),
                target: Tensor::scalar_u32(i as u32 % 10),
            })
            .collect()
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.bin");
        let data = samples(5);
        let manifest = write_dataset(&path, header(5), &data).unwrap();

        let reader = DatasetReader::open(&path).unwrap();
        assert_eq!(reader.header(), &header(5));
        let back: Vec<_> = reader.samples().unwrap().collect::<Result<_, _>>().unwrap();
        assert_eq!(back, data);
        assert_eq!(reader.sample(3).unwrap(), data[3]);
        assert_eq!(
            reader.verify_manifest().unwrap().payload_sha256,
            manifest.payload_sha256
        );

        let len = std::fs::metadata(&path).unwrap().len();
        let header_len = header(5).to_bytes().len() as u64;
        assert_eq!(len, 12 + header_len + 5 * (6 * 4 + 4));
    }

    #[test]
    fn header_bytes_round_trip() {
        let h = header(3).with_provenance(Split::Test, 9, SamplerConfig::words(1, 3));
        let bytes = h.to_bytes();
        let parsed = DatasetHeader::from_bytes(&bytes).unwrap();
        assert_eq!(parsed, h);
        assert_eq!(parsed.to_bytes(), bytes);
    }

    #[test]
    fn empty_dataset() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.bin");
        write_dataset(&path, header(0), &[]).unwrap();
        let reader = DatasetReader::open(&path).unwrap();
        assert!(reader.is_empty());
        assert_eq!(reader.samples().unwrap().count(), 0);
        reader.verify_manifest().unwrap();
    }

    #[test]
    fn heterogeneous_shapes_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut w = DatasetWriter::create(dir.path().join("x.bin"), header(1)).unwrap();
        let bad = TaskSample {
            index: 0,
            input: Tensor::f32(vec![3, 2], vec![0.0; 6]),
            target: Tensor::scalar_u32(0),
        };
        assert!(matches!(
            w.push(&bad),
            Err(StoreError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn count_enforced() {
        let dir = tempfile::tempdir().unwrap();
        let w = DatasetWriter::create(dir.path().join("x.bin"), header(2)).unwrap();
        assert!(matches!(
            w.finish(),
            Err(StoreError::CountMismatch {
                expected: 2,
                actual: 0
            })
        ));
        let mut w = DatasetWriter::create(dir.path().join("y.bin"), header(1)).unwrap();
        let data = samples(2);
        w.push(&data[0]).unwrap();
        assert!(matches!(
            w.push(&data[1]),
            Err(StoreError::CountMismatch { .. })
        ));
    }

    #[test]
    fn corruption_kinds() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.bin");
        write_dataset(&path, header(4), &samples(4)).unwrap();
        let good = std::fs::read(&path).unwrap();

        let mut bytes = good.clone();
        bytes[0] = b'X';
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            DatasetReader::open(&path),
            Err(StoreError::BadMagic { .. })
        ));

        std::fs::write(&path, &good[..good.len() - 3]).unwrap();
        assert!(matches!(
            DatasetReader::open(&path),
            Err(StoreError::Truncated { .. })
        ));

        std::fs::write(&path, &good[..5]).unwrap();
        assert!(matches!(
            DatasetReader::open(&path),
            Err(StoreError::BadMagic { .. })
        ));

        let mut bytes = good.clone();
        let last = bytes.len() - 1;
        bytes[last] ^= 0x01;
        std::fs::write(&path, &bytes).unwrap();
        let reader = DatasetReader::open(&path).unwrap();
        assert!(matches!(
            reader.verify_manifest(),
            Err(StoreError::ChecksumMismatch { .. })
        ));

        let mut bytes = good.clone();
        bytes.push(0);
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            DatasetReader::open(&path),
            Err(StoreError::TrailingBytes { .. })
        ));
    }

    #[test]
    fn index_out_of_range() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.bin");
        write_dataset(&path, header(2), &samples(2)).unwrap();
        let reader = DatasetReader::open(&path).unwrap();
        assert!(matches!(
            reader.sample(2),
            Err(StoreError::IndexOutOfRange { index: 2, count: 2 })
        ));
    }

    #[test]
    fn sidecar_paths() {
        assert_eq!(
            manifest_path(Path::new("a/b.bin")),
            PathBuf::from("a/b.bin.manifest.json")
        );
        assert_eq!(
            preview_dir(Path::new("a/b.bin")),
            PathBuf::from("a/b.bin.preview")
        );
    }
}
