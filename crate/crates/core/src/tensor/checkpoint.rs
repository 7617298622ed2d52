use crate::error::{Error, Result};
use std::io::{Read, Write};
use std::path::Path;

const MAGIC: &[u8; 8] = b"RLWVCKPT";
const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManifestEntry {
    pub name: String,
    pub shape: Vec<usize>,
}

impl ManifestEntry {
    pub fn volume(&self) -> usize {
        self.shape.iter().product()
    }
}

/// Flat parameters plus the layer manifest that explains them.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub manifest: Vec<ManifestEntry>,
    pub values: Vec<f32>,
    pub meta: String,
}

impl Checkpoint {
    pub fn new(manifest: Vec<ManifestEntry>, values: Vec<f32>, meta: impl Into<String>) -> Result<Self> {
        let volume: usize = manifest.iter().map(ManifestEntry::volume).sum();
        if volume != values.len() {
            return Err(Error::Shape(format!(
                "manifest volume {volume} != {} values",
                values.len()
            )));
        }
        Ok(Self {
            manifest,
            values,
            meta: meta.into(),
        })
    }

    pub fn soup_compatible(&self, other: &Checkpoint) -> bool {
        self.manifest == other.manifest
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(32 + self.values.len() * 4 + self.meta.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.manifest.len() as u32).to_le_bytes());
        for entry in &self.manifest {
            out.extend_from_slice(&(entry.name.len() as u16).to_le_bytes());
            out.extend_from_slice(entry.name.as_bytes());
            out.push(entry.shape.len() as u8);
            for &d in &entry.shape {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
        }
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&(self.meta.len() as u32).to_le_bytes());
        out.extend_from_slice(self.meta.as_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8], origin: &Path) -> Result<Self> {
        let mut r = ByteReader { bytes, pos: 0, origin };
        if r.take(8)? != MAGIC {
            return Err(Error::format(origin, "bad checkpoint magic"));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::format(origin, format!("unsupported checkpoint version {version}")));
        }
        let count = r.u32()? as usize;
        let mut manifest = Vec::with_capacity(count);
        for _ in 0..count {
            let len = r.u16()? as usize;
            let name = String::from_utf8(r.take(len)?.to_vec())
                .map_err(|_| Error::format(origin, "manifest name is not UTF-8"))?;
            let rank = r.take(1)?[0] as usize;
            let shape = (0..rank).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
            manifest.push(ManifestEntry { name, shape });
        }
        let n: usize = manifest.iter().map(ManifestEntry::volume).sum();
        let raw = r.take(n * 4)?;
        let values = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        let meta_len = r.u32()? as usize;
        let meta = String::from_utf8(r.take(meta_len)?.to_vec())
            .map_err(|_| Error::format(origin, "meta is not UTF-8"))?;
        if r.pos != bytes.len() {
            return Err(Error::format(origin, "trailing bytes after checkpoint"));
        }
        Checkpoint::new(manifest, values, meta)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, path)
    }
}

struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
    origin: &'a Path,
}

impl<'a> ByteReader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::format(self.origin, "unexpected end of file"));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u16(&mut self) -> Result<u16> {
        let b = self.take(2)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }
    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

fn manifest_diff(a: &[ManifestEntry], b: &[ManifestEntry]) -> String {
    if a.len() != b.len() {
        return format!("{} entries vs {} entries", a.len(), b.len());
    }
    let diffs: Vec<String> = a
        .iter()
        .zip(b)
        .enumerate()
        .filter(|(_, (x, y))| x != y)
        .map(|(i, (x, y))| format!("#{i}: {}{:?} vs {}{:?}", x.name, x.shape, y.name, y.shape))
        .collect();
    diffs.join("; ")
}

/// Element-wise uniform mean of soup-compatible checkpoints.
pub fn average_checkpoints(list: &[Checkpoint]) -> Result<Checkpoint> {
    let first = list
        .first()
        .ok_or_else(|| Error::Invalid("cannot average an empty checkpoint list".into()))?;
    for (i, c) in list.iter().enumerate().skip(1) {
        if !first.soup_compatible(c) {
            return Err(Error::ManifestMismatch(format!(
                "checkpoint {i}: {}",
                manifest_diff(&first.manifest, &c.manifest)
            )));
        }
    }
    let n = list.len() as f64;
    // ordered summation keeps the mean independent of list order
    let mut column = Vec::with_capacity(list.len());
    let values = (0..first.values.len())
        .map(|j| {
            column.clear();
            column.extend(list.iter().map(|c| c.values[j] as f64));
            column.sort_by(f64::total_cmp);
            (column.iter().sum::<f64>() / n) as f32
        })
        .collect();
    Ok(Checkpoint {
        manifest: first.manifest.clone(),
        values,
        meta: first.meta.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn manifest() -> Vec<ManifestEntry> {
        vec![
            ManifestEntry {
                name: "net.0.weight".into(),
                shape: vec![2, 3],
            },
            ManifestEntry {
                name: "net.0.bias".into(),
                shape: vec![2],
            },
        ]
    }

    fn ckpt(values: Vec<f32>) -> Checkpoint {
        Checkpoint::new(manifest(), values, "cfg").unwrap()
    }

    #[test]
    fn volume_invariant_enforced() {
        assert!(Checkpoint::new(manifest(), vec![0.0; 7], "").is_err());
    }

    #[test]
    fn single_and_antisymmetric_soups() {
        let v: Vec<f32> = (0..8).map(|i| i as f32 * 0.37 - 1.0).collect();
        let one = average_checkpoints(&[ckpt(v.clone())]).unwrap();
        assert_eq!(one.values, v);
        let neg: Vec<f32> = v.iter().map(|x| -x).collect();
        let zero = average_checkpoints(&[ckpt(v), ckpt(neg)]).unwrap();
        assert!(zero.values.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn three_way_mean_matches_loop() {
        let a: Vec<f32> = (0..8).map(|i| (i as f32).sin()).collect();
        let b: Vec<f32> = (0..8).map(|i| (i as f32).cos()).collect();
        let c: Vec<f32> = (0..8).map(|i| i as f32 * 0.1).collect();
        let soup = average_checkpoints(&[ckpt(a.clone()), ckpt(b.clone()), ckpt(c.clone())]).unwrap();
        for j in 0..8 {
            let mean = (a[j] as f64 + b[j] as f64 + c[j] as f64) / 3.0;
            assert!((soup.values[j] as f64 - mean).abs() < 1e-7);
        }
        assert_eq!(soup.manifest, manifest());
    }

    #[test]
    fn mismatch_reports_diff() {
        let mut other = manifest();
        other[1].shape = vec![1, 2];
        let b = Checkpoint::new(other, vec![0.0; 8], "").unwrap();
        let err = average_checkpoints(&[ckpt(vec![0.0; 8]), b]).unwrap_err();
        assert!(err.to_string().contains("net.0.bias"), "{err}");
    }

    #[test]
    fn truncated_file_rejected() {
        let bytes = ckpt(vec![1.0; 8]).to_bytes();
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 1], Path::new("x")).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(Checkpoint::from_bytes(&bad, Path::new("x")).is_err());
    }

    proptest! {
        #[test]
        fn round_trip_bit_exact(values in prop::collection::vec(any::<f32>(), 8), meta in ".{0,40}") {
            let c = Checkpoint::new(manifest(), values, meta).unwrap();
            let back = Checkpoint::from_bytes(&c.to_bytes(), Path::new("mem")).unwrap();
            prop_assert_eq!(back.to_bytes(), c.to_bytes());
            let bits: Vec<u32> = back.values.iter().map(|v| v.to_bits()).collect();
            let orig: Vec<u32> = c.values.iter().map(|v| v.to_bits()).collect();
            prop_assert_eq!(bits, orig);
        }

        #[test]
        fn soup_idempotent_and_permutation_invariant(
            a in prop::collection::vec(-10.0f32..10.0, 8),
            b in prop::collection::vec(-10.0f32..10.0, 8),
            c in prop::collection::vec(-10.0f32..10.0, 8),
        ) {
            let same = average_checkpoints(&[ckpt(a.clone()), ckpt(a.clone()), ckpt(a.clone())]).unwrap();
            prop_assert_eq!(&same.values, &a);
            let abc = average_checkpoints(&[ckpt(a.clone()), ckpt(b.clone()), ckpt(c.clone())]).unwrap();
            let cab = average_checkpoints(&[ckpt(c), ckpt(a), ckpt(b)]).unwrap();
            prop_assert_eq!(abc.values, cab.values);
        }
    }
}
