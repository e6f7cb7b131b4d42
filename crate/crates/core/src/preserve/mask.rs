use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use crate::nn::{ParamStore, Real, SrModel};

pub const MASK_MAGIC: &[u8; 8] = b"SRTTAMSK";
pub const MASK_VERSION: u32 = 1;

/// Per-scalar freeze decisions for the adaptable parameters of a model.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FrozenMask {
    masks: BTreeMap<String, Vec<bool>>,
}

impl FrozenMask {
    pub fn from_masks(masks: BTreeMap<String, Vec<bool>>) -> Self {
        FrozenMask { masks }
    }

    /// Nothing frozen, shaped like the adaptable parameters of `model`.
    pub fn none<T: Real>(model: &SrModel<T>) -> Self {
        Self::from_fn(model, |_, _| false)
    }

    pub(crate) fn from_fn<T: Real>(model: &SrModel<T>, mut f: impl FnMut(&str, usize) -> bool) -> Self {
        let masks = model
            .adaptable_names()
            .into_iter()
            .map(|n| {
                let len = model.params().get(&n).expect("adaptable parameter").len();
                let m = (0..len).map(|i| f(&n, i)).collect();
                (n, m)
            })
            .collect();
        FrozenMask { masks }
    }

    /// Reads the adaptable masks currently installed in `model`.
    pub fn of_model<T: Real>(model: &SrModel<T>) -> Self {
        let masks = model
            .adaptable_names()
            .into_iter()
            .map(|n| {
                let m = model.params().get(&n).expect("adaptable parameter").frozen.clone();
                (n, m)
            })
            .collect();
        FrozenMask { masks }
    }

    pub fn masks(&self) -> &BTreeMap<String, Vec<bool>> {
        &self.masks
    }

    pub fn get(&self, name: &str) -> Option<&[bool]> {
        self.masks.get(name).map(Vec::as_slice)
    }

    pub fn frozen_count(&self) -> usize {
        self.masks.values().flatten().filter(|&&b| b).count()
    }

    pub fn scalar_count(&self) -> usize {
        self.masks.values().map(Vec::len).sum()
    }

    /// Freezes all non-adaptable parameters of `model` and applies this mask
    /// to the adaptable ones. The mask must cover exactly the adaptable set.
    pub fn install<T: Real>(&self, model: &mut SrModel<T>) -> Result<()> {
        let names = model.adaptable_names();
        if names.len() != self.masks.len() || names.iter().any(|n| !self.masks.contains_key(n)) {
            return Err(Error::Shape(format!(
                "mask covers {:?}, model adapts {names:?}",
                self.masks.keys().collect::<Vec<_>>()
            )));
        }
        model.freeze_non_adaptable();
        for (name, m) in &self.masks {
            model.params_mut().set_frozen(name, m.clone())?;
        }
        Ok(())
    }

    /// True iff every scalar this mask freezes holds bit-identical values in
    /// `a` and `b`.
    pub fn frozen_values_equal<T: Real>(&self, a: &ParamStore<T>, b: &ParamStore<T>) -> bool {
        self.masks.iter().all(|(name, m)| match (a.get(name), b.get(name)) {
            (Some(pa), Some(pb)) => m
                .iter()
                .enumerate()
                .all(|(i, &f)| !f || pa.value[i].to_f64().to_bits() == pb.value[i].to_f64().to_bits()),
            _ => false,
        })
    }

    /// Little-endian bitset file: magic, version, entry count, then per
    /// parameter its name, scalar count and LSB-first packed bits.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MASK_MAGIC);
        out.extend_from_slice(&MASK_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.masks.len() as u32).to_le_bytes());
        for (name, m) in &self.masks {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(m.len() as u64).to_le_bytes());
            let mut packed = vec![0u8; m.len().div_ceil(8)];
            for (i, _) in m.iter().enumerate().filter(|(_, &b)| b) {
                packed[i / 8] |= 1 << (i % 8);
            }
            out.extend_from_slice(&packed);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |what: &str| Error::Checkpoint(format!("frozen mask: {what}"));
        let mut pos = 0usize;
        let mut take = |n: usize| -> Result<&[u8]> {
            let end = pos.checked_add(n).filter(|&e| e <= bytes.len()).ok_or_else(|| bad("truncated"))?;
            let s = &bytes[pos..end];
            pos = end;
            Ok(s)
        };
        if take(8)? != MASK_MAGIC {
            return Err(bad("bad magic"));
        }
        let u32_at = |s: &[u8]| u32::from_le_bytes(s.try_into().expect("4 bytes"));
        let version = u32_at(take(4)?);
        if version != MASK_VERSION {
            return Err(bad(&format!("unsupported version {version}")));
        }
        let count = u32_at(take(4)?) as usize;
        let mut masks = BTreeMap::new();
        for _ in 0..count {
            let len = u32_at(take(4)?) as usize;
            let name = String::from_utf8(take(len)?.to_vec()).map_err(|_| bad("name is not UTF-8"))?;
            let bits = u64::from_le_bytes(take(8)?.try_into().expect("8 bytes")) as usize;
            let packed = take(bits.div_ceil(8))?;
            let m = (0..bits).map(|i| packed[i / 8] >> (i % 8) & 1 == 1).collect();
            if masks.insert(name, m).is_some() {
                return Err(bad("duplicate parameter name"));
            }
        }
        if pos != bytes.len() {
            return Err(bad("trailing bytes"));
        }
        Ok(FrozenMask { masks })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path.as_ref(), &self.to_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::SrArch;

    #[test]
    fn bitset_round_trip() {
        let model = SrModel::<f32>::new(SrArch::new(1, 4, 2).unwrap(), 0).unwrap();
        let mask = FrozenMask::from_fn(&model, |n, i| (n.len() + i) % 3 == 0);
        let back = FrozenMask::from_bytes(&mask.to_bytes()).unwrap();
        assert_eq!(back, mask);
        assert!(mask.frozen_count() > 0);
        let mut bytes = mask.to_bytes();
        bytes.pop();
        assert!(FrozenMask::from_bytes(&bytes).is_err());
    }

    #[test]
    fn install_freezes_non_adaptable_and_applies_mask() {
        let mut model = SrModel::<f32>::new(SrArch::new(1, 4, 2).unwrap(), 0).unwrap();
        let mask = FrozenMask::from_fn(&model, |_, i| i == 0);
        mask.install(&mut model).unwrap();
        assert_eq!(FrozenMask::of_model(&model), mask);
        let head = model.params().get("head.weight").unwrap();
        assert!(head.frozen.iter().all(|&f| f));
        let other = SrModel::<f32>::new(SrArch::new(2, 4, 2).unwrap(), 0).unwrap();
        assert!(FrozenMask::none(&other).install(&mut model).is_err());
    }
}
