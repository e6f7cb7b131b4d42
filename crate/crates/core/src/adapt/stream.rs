use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{AdaptConfig, AdaptMode};
use super::image::{adapt_image, tta_c_baseline, Adapted};
use super::report::{MetricsReport, MetricsRow};
use crate::classifier::DegradationPredictor;
use crate::degrade::DegradationLabel;
use crate::error::{Error, Result};
use crate::imaging::{psnr, ssim, Image};
use crate::nn::{ParamStore, Real, SrModel};
use crate::rng;

/// How each test image is handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Second-order reconstruction adaptation, gated by the classifier.
    Srtta,
    /// Consistency-loss-only adaptation.
    TtaC,
    /// The pretrained model as is.
    NoAdapt,
}

impl Method {
    /// Report name under `mode`; lifelong runs get a `-lifelong` suffix.
    pub fn label(self, mode: AdaptMode) -> String {
        let base = match self {
            Method::Srtta => "srtta",
            Method::TtaC => "tta-c",
            Method::NoAdapt => return "no-adapt".into(),
        };
        match mode {
            AdaptMode::ParameterReset => base.into(),
            AdaptMode::Lifelong => format!("{base}-lifelong"),
        }
    }
}

/// One test image in stream order.
#[derive(Debug, Clone)]
pub struct StreamItem {
    pub name: String,
    pub domain: String,
    pub lr: Image,
    pub hr: Option<Image>,
}

/// Predictions, classifier labels and metrics of one pass over a stream.
#[derive(Debug, Clone)]
pub struct StreamOutput {
    pub predictions: Vec<Image>,
    pub labels: Vec<DegradationLabel>,
    pub report: MetricsReport,
}

fn check_items(items: &[StreamItem], scale: usize) -> Result<()> {
    for it in items {
        if let Some(hr) = &it.hr {
            let want = (it.lr.channels(), it.lr.height() * scale, it.lr.width() * scale);
            if hr.dims() != want {
                return Err(Error::Shape(format!(
                    "ground truth of `{}` is {:?}, expected {want:?}",
                    it.name,
                    hr.dims()
                )));
            }
        }
    }
    Ok(())
}

fn check_prepared<T: Real>(model: &SrModel<T>) -> Result<()> {
    let ok = model
        .params()
        .iter()
        .filter(|(n, _)| !SrModel::<T>::is_adaptable(n))
        .all(|(_, p)| p.frozen.iter().all(|&f| f));
    if ok {
        Ok(())
    } else {
        Err(Error::Config("install a frozen mask before running a stream".into()))
    }
}

/// Drives `items` through `method` in order.
///
/// In parameter-reset mode the model returns to `reference`'s values (with
/// fresh optimizer state) at the start of every run of consecutive items
/// that share a domain; in lifelong mode it is never reset. The predictor
/// is queried once per image (SRTTA only) and its time is included in the
/// per-image seconds. Each image draws randomness from its own stream under
/// `seed`, keyed by domain and position.
pub fn run_stream<T: Real>(
    model: &mut SrModel<T>,
    reference: &SrModel<T>,
    items: &[StreamItem],
    predictor: &dyn DegradationPredictor,
    cfg: &AdaptConfig,
    method: Method,
    seed: u64,
) -> Result<StreamOutput> {
    cfg.validate_loop()?;
    check_prepared(model)?;
    check_items(items, model.scale())?;
    let theta0: &ParamStore<T> = reference.params();
    let label_name = method.label(cfg.mode);
    let mut out = StreamOutput { predictions: Vec::new(), labels: Vec::new(), report: MetricsReport::default() };
    let mut current: Option<&str> = None;
    for (i, item) in items.iter().enumerate() {
        if current != Some(item.domain.as_str()) {
            if cfg.mode == AdaptMode::ParameterReset {
                model.params_mut().restore_from(theta0)?;
            }
            current = Some(&item.domain);
        }
        let mut rng = rng::stream(seed, &[rng::tag("stream"), rng::tag(&item.domain), i as u64]);
        let start = Instant::now();
        let (label, adapted) = match method {
            Method::Srtta => {
                let label = predictor.predict_label(&item.lr)?;
                (label, adapt_image(model, reference, &item.lr, label, cfg, &mut rng)?)
            }
            Method::TtaC => (DegradationLabel::CLEAN, tta_c_baseline(model, reference, &item.lr, cfg)?),
            Method::NoAdapt => {
                let (prediction, _) = reference.predict(&item.lr)?;
                (DegradationLabel::CLEAN, Adapted { prediction, losses: Vec::new(), restored: 0 })
            }
        };
        let seconds = start.elapsed().as_secs_f64();
        let (psnr_db, ssim_v) = match &item.hr {
            Some(hr) => (Some(psnr(&adapted.prediction, hr)?), Some(ssim(&adapted.prediction, hr)?)),
            None => (None, None),
        };
        log::debug!("{label_name} {}/{}: {label} {psnr_db:?} dB in {seconds:.2}s", item.domain, item.name);
        out.report.push(MetricsRow {
            domain: item.domain.clone(),
            method: label_name.clone(),
            image: item.name.clone(),
            psnr_db,
            ssim: ssim_v,
            seconds,
            error: None,
        });
        out.labels.push(label);
        out.predictions.push(adapted.prediction);
    }
    Ok(out)
}
