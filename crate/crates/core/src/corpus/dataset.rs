use super::{is_val_creature, LabeledClip};
use crate::camera::{quantize, Clip, Frame, CLIP_LEN, FRAME_PIXELS};
use crate::error::{Error, Result};
use crate::skill::Skill;
use std::collections::BTreeSet;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

const MAGIC: &[u8; 8] = b"RLWVCLIP";
const VERSION: u32 = 1;
pub const CLIP_BYTES: usize = CLIP_LEN * FRAME_PIXELS;

/// A clip quantised to bytes, as held in memory and on disk.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StoredClip {
    pub creature: u32,
    pub labels: u8,
    pub pixels: Vec<u8>,
}

impl StoredClip {
    pub fn from_labeled(c: &LabeledClip) -> StoredClip {
        StoredClip {
            creature: c.creature,
            labels: c.labels,
            pixels: c.clip.frames().iter().flat_map(|f| f.pixels.iter().map(|&v| quantize(v))).collect(),
        }
    }

    pub fn clip(&self) -> Clip {
        let frames = self
            .pixels
            .chunks_exact(FRAME_PIXELS)
            .map(|c| Frame::from_bytes(c).expect("frame-sized chunk"))
            .collect();
        Clip::new(frames).expect("eight frames")
    }

    /// Pixel values in [0, 1], frame-major.
    pub fn pixels_f32(&self) -> impl Iterator<Item = f32> + '_ {
        self.pixels.iter().map(|&b| f32::from(b) / 255.0)
    }

    pub fn has(&self, skill: Skill) -> bool {
        self.labels & skill.bit() != 0
    }

    /// Lowest-index label; the class of a curated clip.
    pub fn primary(&self) -> Skill {
        Skill::ALL.into_iter().find(|&s| self.has(s)).expect("at least one label")
    }

    pub fn is_val(&self) -> bool {
        is_val_creature(self.creature)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Dataset {
    pub clips: Vec<StoredClip>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.clips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clips.is_empty()
    }

    pub fn train(&self) -> impl Iterator<Item = &StoredClip> {
        self.clips.iter().filter(|c| !c.is_val())
    }

    pub fn val(&self) -> impl Iterator<Item = &StoredClip> {
        self.clips.iter().filter(|c| c.is_val())
    }

    /// Clips carrying each label, in skill order.
    pub fn label_counts(&self) -> [usize; Skill::COUNT] {
        let mut n = [0; Skill::COUNT];
        for c in &self.clips {
            for s in Skill::ALL {
                n[s.index()] += usize::from(c.has(s));
            }
        }
        n
    }

    /// Keeps the validation split and the first `round(fraction * n)` of the
    /// `n` training creatures.
    pub fn subsample(&self, fraction: f64) -> Result<Dataset> {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(Error::Invalid(format!("fraction must lie in (0, 1], got {fraction}")));
        }
        let train: BTreeSet<u32> = self.train().map(|c| c.creature).collect();
        let keep = (fraction * train.len() as f64).round() as usize;
        let kept: BTreeSet<u32> = train.into_iter().take(keep).collect();
        Ok(Dataset {
            clips: self
                .clips
                .iter()
                .filter(|c| c.is_val() || kept.contains(&c.creature))
                .cloned()
                .collect(),
        })
    }

    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.clips.len() as u32).to_le_bytes())?;
        for c in &self.clips {
            w.write_all(&c.creature.to_le_bytes())?;
            w.write_all(&[c.labels])?;
            w.write_all(&c.pixels)?;
        }
        w.flush()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(BufWriter::new(file)).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Dataset> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = BufReader::new(file);
        let mut read = |buf: &mut [u8], what: &str| {
            r.read_exact(buf)
                .map_err(|e| Error::format(path, format!("truncated {what}: {e}")))
        };
        let mut magic = [0u8; 8];
        read(&mut magic, "header")?;
        if &magic != MAGIC {
            return Err(Error::format(path, "bad magic"));
        }
        let mut word = [0u8; 4];
        read(&mut word, "header")?;
        let version = u32::from_le_bytes(word);
        if version != VERSION {
            return Err(Error::format(path, format!("unsupported version {version}")));
        }
        read(&mut word, "header")?;
        let count = u32::from_le_bytes(word) as usize;
        let mut clips = Vec::with_capacity(count.min(1 << 16));
        for i in 0..count {
            read(&mut word, "clip")?;
            let creature = u32::from_le_bytes(word);
            let mut label = [0u8; 1];
            read(&mut label, "clip")?;
            if label[0] == 0 || label[0] >> Skill::COUNT != 0 {
                return Err(Error::format(path, format!("clip {i}: invalid label mask {:#04x}", label[0])));
            }
            let mut pixels = vec![0u8; CLIP_BYTES];
            read(&mut pixels, "clip")?;
            clips.push(StoredClip {
                creature,
                labels: label[0],
                pixels,
            });
        }
        let mut rest = [0u8; 1];
        if r.read(&mut rest).map_err(|e| Error::io(path, e))? != 0 {
            return Err(Error::format(path, "trailing bytes"));
        }
        Ok(Dataset { clips })
    }
}
