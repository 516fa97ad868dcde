use std::ops::Range;
use std::path::{Path, PathBuf};

use rand::Rng;
use sha2::{Digest, Sha256};

use super::{split_counts, ExperimentConfig};
use crate::channel::{generate_channel, ChannelRealization, ChannelSpec};
use crate::numerics::{rng_stream, ComplexGrid};
use crate::{Error, Result, C64};

pub const DATASET_MAGIC: &[u8; 4] = b"CECH";
pub const DATASET_VERSION: u16 = 1;

const RECORD_SEED_STREAM: u64 = 0xda7a;

/// One stored channel realization and the seed that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRecord {
    pub seed: u64,
    pub realization: ChannelRealization,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub data_file: PathBuf,
    pub count: usize,
    pub seed: u64,
    pub train: Range<usize>,
    pub validation: Range<usize>,
    pub test: Range<usize>,
    pub sha256: String,
    pub config_hash: String,
}

impl Manifest {
    pub fn to_text(&self) -> String {
        let r = |r: &Range<usize>| format!("{}..{}", r.start, r.end);
        format!(
            "format=cech-v{DATASET_VERSION}\ndata_file={}\ncount={}\nseed={}\ntrain={}\nvalidation={}\ntest={}\nsha256={}\nconfig_hash={}\n",
            self.data_file.display(),
            self.count,
            self.seed,
            r(&self.train),
            r(&self.validation),
            r(&self.test),
            self.sha256,
            self.config_hash
        )
    }
}

/// Split boundaries for `count` records from explicit sizes, or 70/10/20
/// when the sizes do not add up to `count`.
pub fn split_ranges(count: usize, sizes: [usize; 3]) -> [Range<usize>; 3] {
    let [a, b, c] = if sizes.iter().sum::<usize>() == count {
        sizes
    } else {
        split_counts(count)
    };
    [0..a, a..a + b, a + b..a + b + c]
}

fn round_to_f32(g: &ComplexGrid) -> ComplexGrid {
    ComplexGrid::from_fn(g.nc(), g.ns(), |k, i| {
        let z = g.get(k, i);
        C64::new(z.re as f32 as f64, z.im as f32 as f64)
    })
}

/// Draws `count` realizations with per-record seeds. Taps are rounded to
/// `f32` so in-memory and reloaded data agree exactly.
pub fn generate_realizations(spec: &ChannelSpec, count: usize, seed: u64) -> Result<Vec<ChannelRecord>> {
    let mut seeds = rng_stream(seed, RECORD_SEED_STREAM);
    (0..count)
        .map(|_| {
            let s: u64 = seeds.random();
            let ch = generate_channel(spec, s)?;
            let realization =
                ChannelRealization::from_taps(round_to_f32(&ch.taps), spec.nc, ch.sample_rate, ch.doppler_hz)?;
            Ok(ChannelRecord { seed: s, realization })
        })
        .collect()
}

pub fn encode_records(records: &[ChannelRecord]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(DATASET_MAGIC);
    out.extend_from_slice(&DATASET_VERSION.to_le_bytes());
    out.extend_from_slice(&(records.len() as u32).to_le_bytes());
    for r in records {
        let ch = &r.realization;
        let mut rec = Vec::with_capacity(40 + 8 * ch.taps.as_slice().len());
        rec.extend_from_slice(&r.seed.to_le_bytes());
        for d in [ch.taps.nc(), ch.taps.ns(), ch.nc()] {
            rec.extend_from_slice(&(d as u32).to_le_bytes());
        }
        rec.extend_from_slice(&ch.sample_rate.to_le_bytes());
        rec.extend_from_slice(&ch.doppler_hz.to_le_bytes());
        for z in ch.taps.as_slice() {
            rec.extend_from_slice(&(z.re as f32).to_le_bytes());
            rec.extend_from_slice(&(z.im as f32).to_le_bytes());
        }
        let crc = crc32fast::hash(&rec);
        out.extend_from_slice(&rec);
        out.extend_from_slice(&crc.to_le_bytes());
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::CorruptDataset(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub fn decode_records(bytes: &[u8]) -> Result<Vec<ChannelRecord>> {
    let mut c = Cursor { bytes, pos: 0 };
    if c.take(4)? != DATASET_MAGIC {
        return Err(Error::CorruptDataset("bad magic".into()));
    }
    let version = u16::from_le_bytes(c.take(2)?.try_into().unwrap());
    if version != DATASET_VERSION {
        return Err(Error::CorruptDataset(format!("unsupported version {version}")));
    }
    let count = c.u32()? as usize;
    let mut out = Vec::with_capacity(count.min(1 << 20));
    for n in 0..count {
        let start = c.pos;
        let seed = c.u64()?;
        let (l, ns, nc) = (c.u32()? as usize, c.u32()? as usize, c.u32()? as usize);
        let sample_rate = f64::from_bits(c.u64()?);
        let doppler_hz = f64::from_bits(c.u64()?);
        if l == 0 || ns == 0 || l > nc {
            return Err(Error::CorruptDataset(format!("record {n}: bad dims {l}x{ns} in {nc}")));
        }
        let cells = l.checked_mul(ns).filter(|&v| v <= bytes.len() / 8 + 1);
        let cells = cells.ok_or_else(|| Error::CorruptDataset(format!("record {n}: oversized")))?;
        let mut taps = Vec::with_capacity(cells);
        for _ in 0..cells {
            let re = c.f32()?;
            let im = c.f32()?;
            taps.push(C64::new(re as f64, im as f64));
        }
        let crc = crc32fast::hash(&bytes[start..c.pos]);
        if c.u32()? != crc {
            return Err(Error::CorruptDataset(format!("record {n}: checksum mismatch")));
        }
        let grid = ComplexGrid::from_fn(l, ns, |k, i| taps[i * l + k]);
        let realization = ChannelRealization::from_taps(grid, nc, sample_rate, doppler_hz)
            .map_err(|e| Error::CorruptDataset(format!("record {n}: {e}")))?;
        out.push(ChannelRecord { seed, realization });
    }
    if c.pos != bytes.len() {
        return Err(Error::CorruptDataset("trailing bytes".into()));
    }
    Ok(out)
}

pub fn manifest_path(data_file: &Path) -> PathBuf {
    let mut p = data_file.as_os_str().to_owned();
    p.push(".manifest");
    PathBuf::from(p)
}

/// Generates, writes and indexes `count` realizations under `out_path`.
pub fn generate_dataset(cfg: &ExperimentConfig, count: usize, seed: u64, out_path: &Path) -> Result<Manifest> {
    let records = generate_realizations(&cfg.channel_spec()?, count, seed)?;
    let bytes = encode_records(&records);
    if let Some(dir) = out_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(out_path, &bytes).map_err(|e| Error::io(out_path, e))?;
    let [train, validation, test] = split_ranges(count, cfg.training.split);
    let manifest = Manifest {
        data_file: out_path.to_path_buf(),
        count,
        seed,
        train,
        validation,
        test,
        sha256: Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect(),
        config_hash: cfg.hash(),
    };
    let mpath = manifest_path(out_path);
    std::fs::write(&mpath, manifest.to_text()).map_err(|e| Error::io(&mpath, e))?;
    Ok(manifest)
}

pub fn load_dataset(path: &Path) -> Result<Vec<ChannelRecord>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_records(&bytes)
}

/// Records split into train/validation/test by the config's sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<ChannelRecord>,
    pub validation: Vec<ChannelRecord>,
    pub test: Vec<ChannelRecord>,
}

impl DatasetSplit {
    pub fn new(mut records: Vec<ChannelRecord>, sizes: [usize; 3]) -> Self {
        let [a, b, _] = split_ranges(records.len(), sizes);
        let test = records.split_off(b.end);
        let validation = records.split_off(a.end);
        DatasetSplit {
            train: records,
            validation,
            test,
        }
    }

    /// The config's dataset, from disk when present, else regenerated in
    /// memory with the same seeds.
    pub fn for_config(cfg: &ExperimentConfig) -> Result<Self> {
        let records = if cfg.paths.dataset.exists() {
            load_dataset(&cfg.paths.dataset)?
        } else {
            generate_realizations(&cfg.channel_spec()?, cfg.training.dataset_count, cfg.training.data_seed)?
        };
        Ok(Self::new(records, cfg.training.split))
    }
}

pub fn freq_responses(records: &[ChannelRecord]) -> Vec<ComplexGrid> {
    records.iter().map(|r| r.realization.freq_response.clone()).collect()
}

pub fn realizations(records: &[ChannelRecord]) -> Vec<ChannelRealization> {
    records.iter().map(|r| r.realization.clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> ExperimentConfig {
        ExperimentConfig::parse("experiment=t\n").unwrap()
    }

    #[test]
    fn ten_records_round_trip_bit_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d/ch.cech");
        let m = generate_dataset(&cfg(), 10, 5, &path).unwrap();
        assert_eq!(m.count, 10);
        let back = load_dataset(&path).unwrap();
        assert_eq!(back.len(), 10);
        let fresh = generate_realizations(&cfg().channel_spec().unwrap(), 10, 5).unwrap();
        assert_eq!(back, fresh);
        let text = std::fs::read_to_string(manifest_path(&path)).unwrap();
        assert!(text.contains("count=10") && text.contains(&m.sha256));
    }

    #[test]
    fn same_seed_gives_identical_files() {
        let dir = tempfile::tempdir().unwrap();
        let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
        generate_dataset(&cfg(), 4, 9, &a).unwrap();
        generate_dataset(&cfg(), 4, 9, &b).unwrap();
        generate_dataset(&cfg(), 4, 10, &c).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
        assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&c).unwrap());
    }

    #[test]
    fn paper_split() {
        let [a, b, c] = split_ranges(50000, [0, 0, 0]);
        assert_eq!((a.len(), b.len(), c.len()), (35000, 5000, 10000));
        let [a, b, c] = split_ranges(5500, [4000, 500, 1000]);
        assert_eq!((a, b, c), (0..4000, 4000..4500, 4500..5500));
    }

    #[test]
    fn corruption_is_detected() {
        let recs = generate_realizations(&cfg().channel_spec().unwrap(), 2, 1).unwrap();
        let bytes = encode_records(&recs);
        assert_eq!(decode_records(&bytes).unwrap(), recs);
        for cut in [0, 3, 10, bytes.len() - 1] {
            assert!(matches!(decode_records(&bytes[..cut]), Err(Error::CorruptDataset(_))));
        }
        let mut flipped = bytes.clone();
        flipped[40] ^= 1;
        assert!(matches!(decode_records(&flipped), Err(Error::CorruptDataset(_))));
        let mut extra = bytes;
        extra.push(0);
        assert!(decode_records(&extra).is_err());
    }

    #[test]
    fn split_keeps_order() {
        let recs = generate_realizations(&cfg().channel_spec().unwrap(), 10, 1).unwrap();
        let s = DatasetSplit::new(recs.clone(), [0, 0, 0]);
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (7, 1, 2));
        assert_eq!(s.test[1], recs[9]);
    }
}
