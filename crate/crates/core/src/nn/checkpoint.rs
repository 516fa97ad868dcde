use super::{ConvLayer, Network, Real};
use crate::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"CECN";
pub const CHECKPOINT_VERSION: u16 = 1;

/// Little-endian serialisation; weights are stored as f32.
pub fn checkpoint_save<T: Real>(net: &Network<T>) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + 4 * net.param_count() + 16 * net.layers().len());
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(net.layers().len() as u16).to_le_bytes());
    for l in net.layers() {
        for d in [l.in_channels, l.out_channels, l.kh, l.kw] {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in l.weights.iter().chain(&l.bias) {
            out.extend_from_slice(&(v.to_f64() as f32).to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::CorruptCheckpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        let raw = self.take(n.checked_mul(4).ok_or_else(|| Error::CorruptCheckpoint("layer too large".into()))?)?;
        Ok(raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect())
    }
}

pub fn checkpoint_load<T: Real>(bytes: &[u8]) -> Result<Network<T>> {
    if bytes.len() < 12 {
        return Err(Error::CorruptCheckpoint("file too short".into()));
    }
    if &bytes[..4] != CHECKPOINT_MAGIC {
        return Err(Error::CorruptCheckpoint("bad magic".into()));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let mut r = Reader { bytes: body, pos: 4 };
    let version = r.u16()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::CorruptCheckpoint(format!("unsupported version {version}")));
    }
    let count = r.u16()? as usize;
    let mut layers = Vec::with_capacity(count);
    for _ in 0..count {
        let dims = [r.u32()?, r.u32()?, r.u32()?, r.u32()?].map(|d| d as usize);
        let [cin, cout, kh, kw] = dims;
        if dims.contains(&0) {
            return Err(Error::CorruptCheckpoint("zero layer dimension".into()));
        }
        let nw = cout
            .checked_mul(cin)
            .and_then(|v| v.checked_mul(kh))
            .and_then(|v| v.checked_mul(kw))
            .ok_or_else(|| Error::CorruptCheckpoint("layer too large".into()))?;
        let weights = r.f32s(nw)?;
        let bias = r.f32s(cout)?;
        layers.push(ConvLayer {
            in_channels: cin,
            out_channels: cout,
            kh,
            kw,
            weights: weights.into_iter().map(|v| T::from_f64(v as f64)).collect(),
            bias: bias.into_iter().map(|v| T::from_f64(v as f64)).collect(),
        });
    }
    if r.pos != body.len() {
        return Err(Error::CorruptCheckpoint(format!("{} trailing bytes", body.len() - r.pos)));
    }
    let stored = u32::from_le_bytes(tail.try_into().unwrap());
    if crc32fast::hash(body) != stored {
        return Err(Error::CorruptCheckpoint("checksum mismatch".into()));
    }
    Network::new(layers).map_err(|e| Error::CorruptCheckpoint(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::rng_stream;

    fn net() -> Network<f32> {
        let mut rng = rng_stream(5, 0);
        Network::new(vec![ConvLayer::init(1, 2, 3, 2, &mut rng), ConvLayer::init(2, 1, 1, 1, &mut rng)]).unwrap()
    }

    #[test]
    fn save_load_save_is_byte_identical() {
        let a = checkpoint_save(&net());
        let loaded: Network<f32> = checkpoint_load(&a).unwrap();
        assert_eq!(loaded, net());
        assert_eq!(checkpoint_save(&loaded), a);
    }

    #[test]
    fn layout_is_little_endian() {
        let mut l = ConvLayer::<f32>::zeros(1, 1, 1, 1);
        l.weights[0] = 1.0;
        l.bias[0] = -2.0;
        let bytes = checkpoint_save(&Network::new(vec![l]).unwrap());
        let mut expect = b"CECN".to_vec();
        expect.extend_from_slice(&[1, 0, 1, 0]);
        for _ in 0..4 {
            expect.extend_from_slice(&[1, 0, 0, 0]);
        }
        // 1.0f32 = 0x3f800000, -2.0f32 = 0xc0000000
        expect.extend_from_slice(&[0x00, 0x00, 0x80, 0x3f, 0x00, 0x00, 0x00, 0xc0]);
        assert_eq!(&bytes[..expect.len()], &expect[..]);
        assert_eq!(bytes.len(), expect.len() + 4);
        // reading the words big-endian would give different values
        assert_ne!(f32::from_be_bytes([0x00, 0x00, 0x80, 0x3f]), 1.0);
    }

    #[test]
    fn truncation_and_corruption_are_detected() {
        let a = checkpoint_save(&net());
        for cut in [0, 3, 8, 20, a.len() - 1] {
            assert!(matches!(checkpoint_load::<f32>(&a[..cut]), Err(Error::CorruptCheckpoint(_))));
        }
        let mut b = a.clone();
        b[30] ^= 0x40;
        assert!(matches!(checkpoint_load::<f32>(&b), Err(Error::CorruptCheckpoint(_))));
        let mut c = a.clone();
        c[0] = b'X';
        assert!(matches!(checkpoint_load::<f32>(&c), Err(Error::CorruptCheckpoint(_))));
        let mut d = a;
        d[4] = 9;
        assert!(matches!(checkpoint_load::<f32>(&d), Err(Error::CorruptCheckpoint(_))));
    }
}
