//! Prediction quality assessment: MSE, RMSE, PSNR, SSIM per tile with
//! means over tiles, plus the 2-class confusion matrix with overall
//! accuracy and Cohen's kappa.

use crate::exec;
use crate::maskops::BinaryMask;
use crate::tensor::{Element, Tensor};
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("shape mismatch: {0:?} vs {1:?}")]
    ShapeMismatch(Vec<usize>, Vec<usize>),
    #[error("image {width}x{height} smaller than the {window}x{window} SSIM window")]
    ImageSmallerThanWindow {
        width: usize,
        height: usize,
        window: usize,
    },
    #[error("confusion matrix over zero pixels")]
    EmptyConfusion,
    #[error("mask dimensions differ: {0}x{1} vs {2}x{3}")]
    DimMismatch(usize, usize, usize, usize),
}

/// Mean squared difference.
pub fn mse<E: Element>(a: &Tensor<E>, b: &Tensor<E>) -> Result<f64, MetricError> {
    if a.shape() != b.shape() {
        return Err(MetricError::ShapeMismatch(
            a.shape().to_vec(),
            b.shape().to_vec(),
        ));
    }
    let sum: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| {
            let d = x.to_f64() - y.to_f64();
            d * d
        })
        .sum();
    Ok(sum / a.len() as f64)
}

/// Root of [`mse`].
pub fn rmse<E: Element>(a: &Tensor<E>, b: &Tensor<E>) -> Result<f64, MetricError> {
    Ok(mse(a, b)?.sqrt())
}

/// 10 log10(max^2 / mse), in dB. Identical inputs give +inf.
pub fn psnr<E: Element>(a: &Tensor<E>, b: &Tensor<E>, max_value: f64) -> Result<f64, MetricError> {
    let m = mse(a, b)?;
    if m == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (max_value * max_value / m).log10())
}

/// SSIM parameters: reference single-scale settings, dynamic range L=1
/// for [0,1]-scaled data.
#[derive(Debug, Clone, Copy)]
pub struct SsimConfig {
    pub window: usize,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
    pub dynamic_range: f64,
}

impl Default for SsimConfig {
    fn default() -> Self {
        SsimConfig {
            window: 11,
            sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
            dynamic_range: 1.0,
        }
    }
}

fn gaussian_window(size: usize, sigma: f64) -> Vec<f64> {
    let half = (size / 2) as isize;
    let mut w = Vec::with_capacity(size * size);
    for y in -half..=half {
        for x in -half..=half {
            w.push((-((x * x + y * y) as f64) / (2.0 * sigma * sigma)).exp());
        }
    }
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    w
}

/// Mean local SSIM over all fully-interior window positions.
///
/// Inputs are [C,H,W] (or [H,W]); multi-band images are scored per band
/// and averaged.
pub fn ssim<E: Element>(a: &Tensor<E>, b: &Tensor<E>, cfg: &SsimConfig) -> Result<f64, MetricError> {
    if a.shape() != b.shape() {
        return Err(MetricError::ShapeMismatch(
            a.shape().to_vec(),
            b.shape().to_vec(),
        ));
    }
    let (bands, h, w) = match a.shape() {
        [h, w] => (1, *h, *w),
        [c, h, w] => (*c, *h, *w),
        other => return Err(MetricError::ShapeMismatch(other.to_vec(), other.to_vec())),
    };
    let win = cfg.window;
    if h < win || w < win {
        return Err(MetricError::ImageSmallerThanWindow {
            width: w,
            height: h,
            window: win,
        });
    }
    let weights = gaussian_window(win, cfg.sigma);
    let c1 = (cfg.k1 * cfg.dynamic_range).powi(2);
    let c2 = (cfg.k2 * cfg.dynamic_range).powi(2);

    let mut band_scores = Vec::with_capacity(bands);
    for band in 0..bands {
        let xa = &a.data()[band * h * w..(band + 1) * h * w];
        let xb = &b.data()[band * h * w..(band + 1) * h * w];
        // One task per window row; scores averaged in fixed order.
        let rows = exec::map_range(h - win + 1, |oy| {
            let mut row_sum = 0.0;
            for ox in 0..=(w - win) {
                let mut mu_x = 0.0;
                let mut mu_y = 0.0;
                let mut xx = 0.0;
                let mut yy = 0.0;
                let mut xy = 0.0;
                for wy in 0..win {
                    for wx in 0..win {
                        let wgt = weights[wy * win + wx];
                        let px = xa[(oy + wy) * w + ox + wx].to_f64();
                        let py = xb[(oy + wy) * w + ox + wx].to_f64();
                        mu_x += wgt * px;
                        mu_y += wgt * py;
                        xx += wgt * (px * px);
                        yy += wgt * (py * py);
                        // Grouped so the product is symmetric in (a, b).
                        xy += wgt * (px * py);
                    }
                }
                let var_x = xx - mu_x * mu_x;
                let var_y = yy - mu_y * mu_y;
                let cov = xy - mu_x * mu_y;
                let num = (2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2);
                let den = (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2);
                row_sum += num / den;
            }
            row_sum
        });
        let positions = ((h - win + 1) * (w - win + 1)) as f64;
        band_scores.push(rows.iter().sum::<f64>() / positions);
    }
    Ok(band_scores.iter().sum::<f64>() / bands as f64)
}

/// 2x2 counts indexed truth x prediction, class order (urban, non-urban).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConfusionMatrix {
    /// counts[t][p]: t=0 truth urban, t=1 truth non-urban; same for p.
    pub counts: [[u64; 2]; 2],
}

impl ConfusionMatrix {
    pub fn from_masks(truth: &BinaryMask, pred: &BinaryMask) -> Result<Self, MetricError> {
        if truth.width() != pred.width() || truth.height() != pred.height() {
            return Err(MetricError::DimMismatch(
                truth.width(),
                truth.height(),
                pred.width(),
                pred.height(),
            ));
        }
        if truth.width() * truth.height() == 0 {
            return Err(MetricError::EmptyConfusion);
        }
        let mut counts = [[0u64; 2]; 2];
        for (&t, &p) in truth.bits().iter().zip(pred.bits()) {
            // bit 1 = urban = class index 0
            counts[1 - t as usize][1 - p as usize] += 1;
        }
        Ok(ConfusionMatrix { counts })
    }

    /// Accumulate another matrix into this one.
    pub fn merge(&mut self, other: &ConfusionMatrix) {
        for t in 0..2 {
            for p in 0..2 {
                self.counts[t][p] += other.counts[t][p];
            }
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// trace / total.
    pub fn accuracy(&self) -> f64 {
        let correct = self.counts[0][0] + self.counts[1][1];
        correct as f64 / self.total() as f64
    }

    /// Cohen's kappa: (p_o - p_e) / (1 - p_e) with p_e from marginals.
    pub fn kappa(&self) -> f64 {
        let total = self.total() as f64;
        let p_o = self.accuracy();
        let mut p_e = 0.0;
        for k in 0..2 {
            let row: u64 = self.counts[k].iter().sum();
            let col: u64 = self.counts[0][k] + self.counts[1][k];
            p_e += (row as f64 / total) * (col as f64 / total);
        }
        if (1.0 - p_e).abs() < f64::EPSILON {
            // Both raters constant on the same class: perfect agreement.
            return if p_o >= 1.0 { 1.0 } else { 0.0 };
        }
        (p_o - p_e) / (1.0 - p_e)
    }

    /// Rows normalized to sum to 1 (per-truth-class rates).
    pub fn normalized(&self) -> [[f64; 2]; 2] {
        let mut out = [[0.0; 2]; 2];
        for t in 0..2 {
            let row: u64 = self.counts[t].iter().sum();
            for p in 0..2 {
                out[t][p] = if row == 0 {
                    0.0
                } else {
                    self.counts[t][p] as f64 / row as f64
                };
            }
        }
        out
    }

    /// Text rendering of the normalized matrix with class headers.
    pub fn normalized_table(&self, label: &str) -> String {
        let n = self.normalized();
        let mut s = String::new();
        let _ = writeln!(s, "normalized confusion matrix ({label})");
        let _ = writeln!(s, "{:>12} {:>10} {:>10}", "truth\\pred", "urban", "non-urban");
        let _ = writeln!(s, "{:>12} {:>10.4} {:>10.4}", "urban", n[0][0], n[0][1]);
        let _ = writeln!(s, "{:>12} {:>10.4} {:>10.4}", "non-urban", n[1][0], n[1][1]);
        let _ = writeln!(s, "accuracy {:.4}  kappa {:.4}", self.accuracy(), self.kappa());
        s
    }
}

/// Per-tile scores for one prediction method.
#[derive(Debug, Clone, PartialEq)]
pub struct TileMetrics {
    pub mse: f64,
    pub rmse: f64,
    pub psnr: f64,
    pub ssim: f64,
}

/// Per-tile and mean image-quality metrics.
///
/// Means are arithmetic over tiles. Because mean-of-rmse differs from
/// sqrt-of-mean-mse, both conventions are reported.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub tiles: Vec<TileMetrics>,
}

impl MetricReport {
    /// Score prediction tiles against truth tiles pairwise.
    pub fn compute<E: Element>(
        truth: &[Tensor<E>],
        pred: &[Tensor<E>],
        ssim_cfg: &SsimConfig,
    ) -> Result<Self, MetricError> {
        if truth.len() != pred.len() {
            return Err(MetricError::ShapeMismatch(
                vec![truth.len()],
                vec![pred.len()],
            ));
        }
        let pairs: Vec<(&Tensor<E>, &Tensor<E>)> =
            truth.iter().zip(pred.iter()).collect();
        let tiles = exec::map_slice(&pairs, |(t, p)| -> Result<TileMetrics, MetricError> {
            let m = mse(t, p)?;
            Ok(TileMetrics {
                mse: m,
                rmse: m.sqrt(),
                psnr: psnr(t, p, 1.0)?,
                ssim: ssim(t, p, ssim_cfg)?,
            })
        })
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
        Ok(MetricReport { tiles })
    }

    pub fn tile_count(&self) -> usize {
        self.tiles.len()
    }

    pub fn mean_mse(&self) -> f64 {
        self.tiles.iter().map(|t| t.mse).sum::<f64>() / self.tiles.len() as f64
    }

    /// Mean of per-tile RMSE values (the per-block reporting convention).
    pub fn mean_rmse(&self) -> f64 {
        self.tiles.iter().map(|t| t.rmse).sum::<f64>() / self.tiles.len() as f64
    }

    /// sqrt of the mean MSE (the pooled convention).
    pub fn rmse_of_mean_mse(&self) -> f64 {
        self.mean_mse().sqrt()
    }

    pub fn mean_psnr(&self) -> f64 {
        self.tiles.iter().map(|t| t.psnr).sum::<f64>() / self.tiles.len() as f64
    }

    pub fn mean_ssim(&self) -> f64 {
        self.tiles.iter().map(|t| t.ssim).sum::<f64>() / self.tiles.len() as f64
    }

    /// CSV: one row per tile plus summary rows for both mean conventions.
    pub fn to_csv(&self, method: &str) -> String {
        let mut s = String::from("method,tile,mse,rmse,psnr,ssim\n");
        for (i, t) in self.tiles.iter().enumerate() {
            let _ = writeln!(
                s,
                "{method},{i},{:.9},{:.9},{},{:.9}",
                t.mse,
                t.rmse,
                fmt_db(t.psnr),
                t.ssim
            );
        }
        let _ = writeln!(
            s,
            "{method},mean,{:.9},{:.9},{},{:.9}",
            self.mean_mse(),
            self.mean_rmse(),
            fmt_db(self.mean_psnr()),
            self.mean_ssim()
        );
        let _ = writeln!(
            s,
            "{method},rmse_of_mean_mse,,{:.9},,",
            self.rmse_of_mean_mse()
        );
        s
    }
}

fn fmt_db(v: f64) -> String {
    if v.is_infinite() {
        "inf".to_string()
    } else {
        format!("{v:.9}")
    }
}

/// Summary table comparing methods over the same tiles: one row per
/// method with SSIM / PSNR / RMSE / MSE columns.
pub fn summary_table(entries: &[(&str, &MetricReport)]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<24} {:>10} {:>10} {:>10} {:>10}",
        "", "SSIM", "PSNR", "RMSE", "MSE"
    );
    for (name, report) in entries {
        let _ = writeln!(
            s,
            "{:<24} {:>10.4} {:>10} {:>10.4} {:>10.4}",
            name,
            report.mean_ssim(),
            if report.mean_psnr().is_infinite() {
                "inf".to_string()
            } else {
                format!("{:.4}", report.mean_psnr())
            },
            report.mean_rmse(),
            report.mean_mse()
        );
    }
    s
}
