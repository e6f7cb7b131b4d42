use std::cmp::Ordering;

use rand::Rng;

use super::consistency::consistency_loss;
use super::mask::FrozenMask;
use crate::error::{Error, Result};
use crate::imaging::Image;
use crate::nn::{ParamStore, Real, SrModel};

/// Per-scalar importance of the adaptable parameters: the mean squared
/// consistency-loss gradient over a clean set.
#[derive(Debug, Clone, PartialEq)]
pub struct FisherScores {
    /// `(parameter name, per-scalar score)`, sorted by name.
    entries: Vec<(String, Vec<f64>)>,
    clean_count: usize,
}

/// `ceil(rho * p)`, ignoring float noise in products that are integral.
pub fn freeze_count(rho: f64, p: usize) -> usize {
    let v = rho * p as f64;
    let r = v.round();
    if (v - r).abs() <= 1e-9 * (p.max(1) as f64) {
        r as usize
    } else {
        v.ceil() as usize
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if (0.0..=1.0).contains(&rho) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("freeze ratio must lie in [0, 1], got {rho}")))
    }
}

impl FisherScores {
    pub fn from_entries(mut entries: Vec<(String, Vec<f64>)>, clean_count: usize) -> Result<Self> {
        if let Some((name, _)) = entries.iter().find(|(_, s)| s.iter().any(|v| !v.is_finite() || *v < 0.0)) {
            return Err(Error::InvalidArgument(format!("importance of `{name}` is negative or non-finite")));
        }
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(FisherScores { entries, clean_count })
    }

    pub fn entries(&self) -> &[(String, Vec<f64>)] {
        &self.entries
    }

    pub fn get(&self, name: &str) -> Option<&[f64]> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, s)| s.as_slice())
    }

    pub fn clean_count(&self) -> usize {
        self.clean_count
    }

    pub fn scalar_count(&self) -> usize {
        self.entries.iter().map(|(_, s)| s.len()).sum()
    }

    /// All scalars as `(entry, index)`, most important first; ties go to the
    /// lexicographically smaller `(name, index)`.
    pub fn ranking(&self) -> Vec<(usize, usize)> {
        let mut order: Vec<(usize, usize)> = self
            .entries
            .iter()
            .enumerate()
            .flat_map(|(e, (_, s))| (0..s.len()).map(move |i| (e, i)))
            .collect();
        // Entries are name-sorted, so (entry, index) order is (name, index) order.
        order.sort_by(|&(ea, ia), &(eb, ib)| {
            self.entries[eb].1[ib]
                .partial_cmp(&self.entries[ea].1[ia])
                .unwrap_or(Ordering::Equal)
                .then((ea, ia).cmp(&(eb, ib)))
        });
        order
    }

    /// The `ceil(rho * P)`-th largest score; infinite when nothing is frozen.
    pub fn threshold(&self, rho: f64) -> Result<f64> {
        check_rho(rho)?;
        let k = freeze_count(rho, self.scalar_count());
        if k == 0 {
            return Ok(f64::INFINITY);
        }
        let (e, i) = self.ranking()[k - 1];
        Ok(self.entries[e].1[i])
    }
}

/// Importance of every adaptable scalar of `model` (at its pretrained
/// values), averaged over `clean_set`.
pub fn fisher_scores<T: Real>(model: &SrModel<T>, clean_set: &[Image]) -> Result<FisherScores> {
    if clean_set.is_empty() {
        return Err(Error::InvalidArgument("importance estimation needs at least one clean image".into()));
    }
    let names = model.adaptable_names();
    let mut acc: Vec<Vec<f64>> = names
        .iter()
        .map(|n| vec![0.0; model.params().get(n).expect("adaptable parameter").len()])
        .collect();
    for x in clean_set {
        let (_, grads) = consistency_loss(model, model, x)?;
        for (name, a) in names.iter().zip(acc.iter_mut()) {
            let g = grads.get(name).expect("gradient slot");
            a.iter_mut().zip(g).for_each(|(s, v)| *s += v.to_f64() * v.to_f64());
        }
    }
    let n = clean_set.len() as f64;
    let entries = names
        .into_iter()
        .zip(acc)
        .map(|(name, mut s)| {
            s.iter_mut().for_each(|v| *v /= n);
            (name, s)
        })
        .collect();
    FisherScores::from_entries(entries, clean_set.len())
}

/// Freezes exactly `ceil(rho * P)` scalars: the highest-scoring ones.
pub fn select_frozen(scores: &FisherScores, rho: f64) -> Result<FrozenMask> {
    check_rho(rho)?;
    let k = freeze_count(rho, scores.scalar_count());
    let mut masks: Vec<(String, Vec<bool>)> =
        scores.entries.iter().map(|(n, s)| (n.clone(), vec![false; s.len()])).collect();
    for (e, i) in scores.ranking().into_iter().take(k) {
        masks[e].1[i] = true;
    }
    Ok(FrozenMask::from_masks(masks.into_iter().collect()))
}

/// Random-selection baseline: `ceil(rho * P)` adaptable scalars chosen
/// uniformly without replacement.
pub fn random_frozen<T: Real, R: Rng + ?Sized>(model: &SrModel<T>, rho: f64, rng: &mut R) -> Result<FrozenMask> {
    check_rho(rho)?;
    let p = model.adaptable_scalar_count();
    let k = freeze_count(rho, p);
    let mut chosen = vec![false; p];
    for i in rand::seq::index::sample(rng, p, k) {
        chosen[i] = true;
    }
    let mut flat = chosen.into_iter();
    Ok(FrozenMask::from_fn(model, |_, _| flat.next().expect("one flag per scalar")))
}

pub const STOCHASTIC_RESTORE_RATE: f64 = 0.01;

/// Resets each adaptable scalar to its `theta0` value (and zeroes its Adam
/// moments) independently with probability `rate`. Returns how many were
/// reset.
pub fn stochastic_restore<T: Real, R: Rng + ?Sized>(
    params: &mut ParamStore<T>,
    theta0: &ParamStore<T>,
    rate: f64,
    rng: &mut R,
) -> Result<usize> {
    params.check_aligned(theta0)?;
    if !(0.0..=1.0).contains(&rate) {
        return Err(Error::InvalidArgument(format!("restore rate must lie in [0, 1], got {rate}")));
    }
    let mut count = 0;
    for (name, p0) in theta0.iter().filter(|(n, _)| SrModel::<T>::is_adaptable(n)) {
        for (i, &v) in p0.value.iter().enumerate() {
            if rng.random_bool(rate) {
                params.reset_scalar(name, i, v);
                count += 1;
            }
        }
    }
    Ok(count)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Grads, SrArch};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scores(v: Vec<f64>) -> FisherScores {
        FisherScores::from_entries(vec![("body.0.conv1.weight".into(), v)], 1).unwrap()
    }

    #[test]
    fn freeze_count_is_exact_ceiling() {
        assert_eq!(freeze_count(0.0, 10), 0);
        assert_eq!(freeze_count(1.0 / 3.0, 3), 1);
        assert_eq!(freeze_count(0.5, 7), 4);
        assert_eq!(freeze_count(0.1, 30), 3);
        assert_eq!(freeze_count(1.0, 9), 9);
    }

    #[test]
    fn selects_the_top_scorer() {
        let s = scores(vec![0.9, 0.5, 0.1]);
        let m = select_frozen(&s, 1.0 / 3.0).unwrap();
        assert_eq!(m.get("body.0.conv1.weight").unwrap(), &[true, false, false]);
        assert_eq!(s.threshold(1.0 / 3.0).unwrap(), 0.9);
        assert_eq!(s.threshold(0.0).unwrap(), f64::INFINITY);
        assert!(select_frozen(&s, 1.5).is_err());
    }

    #[test]
    fn ties_break_by_name_then_index() {
        let s = FisherScores::from_entries(
            vec![("body.1.conv1.bias".into(), vec![1.0, 1.0]), ("body.0.conv2.bias".into(), vec![1.0, 2.0])],
            1,
        )
        .unwrap();
        let m = select_frozen(&s, 0.5).unwrap();
        assert_eq!(m.get("body.0.conv2.bias").unwrap(), &[true, true]);
        assert_eq!(m.get("body.1.conv1.bias").unwrap(), &[false, false]);
    }

    #[test]
    fn empty_clean_set_fails() {
        let m = SrModel::<f64>::new(SrArch::new(1, 4, 2).unwrap(), 0).unwrap();
        assert!(fisher_scores(&m, &[]).is_err());
    }

    #[test]
    fn duplicated_clean_set_gives_same_scores() {
        let m = SrModel::<f64>::new(SrArch::new(1, 4, 2).unwrap(), 2).unwrap();
        let a = Image::from_fn(3, 8, 8, |c, y, x| ((c + y * 2 + x * 3) % 7) as f32 / 7.0);
        let b = Image::from_fn(3, 8, 8, |c, y, x| ((c * 3 + y + x * x) % 5) as f32 / 5.0);
        let once = fisher_scores(&m, &[a.clone(), b.clone()]).unwrap();
        let twice = fisher_scores(&m, &[a.clone(), b.clone(), b, a]).unwrap();
        for ((_, x), (_, y)) in once.entries().iter().zip(twice.entries()) {
            for (p, q) in x.iter().zip(y) {
                assert!((p - q).abs() <= 1e-12 * p.abs().max(1e-30));
            }
        }
        assert!(once.entries().iter().all(|(n, _)| n.starts_with("body.")));
    }

    #[test]
    fn random_selection_has_exact_count() {
        let m = SrModel::<f32>::new(SrArch::new(2, 4, 2).unwrap(), 0).unwrap();
        let mask = random_frozen(&m, 0.5, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(mask.frozen_count(), freeze_count(0.5, m.adaptable_scalar_count()));
    }

    #[test]
    fn restore_rates() {
        let theta0 = SrModel::<f32>::new(SrArch::new(2, 4, 2).unwrap(), 0).unwrap();
        let mut m = theta0.clone();
        let mut g = Grads::zeros_like(m.params());
        for name in m.params().names().map(str::to_string).collect::<Vec<_>>() {
            g.get_mut(&name).unwrap().fill(1.0);
        }
        m.params_mut().adam_step(&g, 1e-2).unwrap();
        let moved = m.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        assert_eq!(stochastic_restore(m.params_mut(), theta0.params(), 0.0, &mut rng).unwrap(), 0);
        assert!(m.params().values_equal(moved.params()));
        stochastic_restore(m.params_mut(), theta0.params(), 1.0, &mut rng).unwrap();
        for name in m.adaptable_names() {
            assert_eq!(m.params().get(&name).unwrap().value, theta0.params().get(&name).unwrap().value);
            assert!(m.params().get(&name).unwrap().moments().0.iter().all(|&v| v == 0.0));
        }
    }
}
