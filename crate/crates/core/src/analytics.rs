//! Parameter counts of the mixture classifiers and of the SDGM baselines,
//! plus the ratio table comparing them.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::float;
use crate::gmm::CovarianceFamily;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ClassifierFamily {
    DgmmcS,
    DgmmcD,
    DgmmcF,
    SdgmD,
    SdgmF,
}

impl ClassifierFamily {
    pub const ALL: [ClassifierFamily; 5] = [
        Self::DgmmcS,
        Self::DgmmcD,
        Self::DgmmcF,
        Self::SdgmD,
        Self::SdgmF,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::DgmmcS => "DGMMC-S",
            Self::DgmmcD => "DGMMC-D",
            Self::DgmmcF => "DGMMC-F",
            Self::SdgmD => "SDGM-D",
            Self::SdgmF => "SDGM-F",
        }
    }

    pub fn from_covariance(family: CovarianceFamily) -> Self {
        match family {
            CovarianceFamily::Spherical => Self::DgmmcS,
            CovarianceFamily::Diagonal => Self::DgmmcD,
            CovarianceFamily::Full => Self::DgmmcF,
        }
    }
}

fn check_domain(classes: u64, components: u64, dim: u64) -> Result<()> {
    if classes < 2 {
        return Err(Error::Domain(format!(
            "parameter counts need at least 2 classes, got {classes}"
        )));
    }
    if components < 1 || dim < 1 {
        return Err(Error::Domain(format!(
            "components and dimension must be positive, got G={components} d={dim}"
        )));
    }
    Ok(())
}

/// Learnt parameters of a mixture classifier.
///
/// Means `C·G·d`, priors `C`, weights `C·G` (only when `G ≥ 2`), and
/// covariances `C·G`, `C·G·d` or `C·G·d²` for the spherical, diagonal and
/// full variants.
pub fn count_dgmmc(family: CovarianceFamily, classes: u64, components: u64, dim: u64) -> Result<u64> {
    check_domain(classes, components, dim)?;
    let cg = classes * components;
    let weights = if components >= 2 { cg } else { 0 };
    let cov = match family {
        CovarianceFamily::Spherical => cg,
        CovarianceFamily::Diagonal => cg * dim,
        CovarianceFamily::Full => cg * dim * dim,
    };
    Ok(cg * dim + classes + weights + cov)
}

/// Learnt parameters of the SDGM baselines: `C·G·(4d+1)` for the diagonal
/// variant and `C·G·(d²+3d+1)` for the full one.
pub fn count_sdgm(family: CovarianceFamily, classes: u64, components: u64, dim: u64) -> Result<u64> {
    check_domain(classes, components, dim)?;
    let cg = classes * components;
    match family {
        CovarianceFamily::Diagonal => Ok(cg * (4 * dim + 1)),
        CovarianceFamily::Full => Ok(cg * (dim * dim + 3 * dim + 1)),
        CovarianceFamily::Spherical => Err(Error::Domain("SDGM has no spherical variant".into())),
    }
}

/// Count for any of the five families.
pub fn count(family: ClassifierFamily, classes: u64, components: u64, dim: u64) -> Result<u64> {
    match family {
        ClassifierFamily::DgmmcS => count_dgmmc(CovarianceFamily::Spherical, classes, components, dim),
        ClassifierFamily::DgmmcD => count_dgmmc(CovarianceFamily::Diagonal, classes, components, dim),
        ClassifierFamily::DgmmcF => count_dgmmc(CovarianceFamily::Full, classes, components, dim),
        ClassifierFamily::SdgmD => count_sdgm(CovarianceFamily::Diagonal, classes, components, dim),
        ClassifierFamily::SdgmF => count_sdgm(CovarianceFamily::Full, classes, components, dim),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CountReport {
    pub family: ClassifierFamily,
    pub classes: u64,
    pub components: u64,
    pub dim: u64,
    pub parameter_count: u64,
    /// `count / count(DGMMC-S)` at the same `(C, G, d)`.
    pub ratio: Option<f64>,
}

impl CountReport {
    pub fn new(family: ClassifierFamily, classes: u64, components: u64, dim: u64) -> Result<Self> {
        let parameter_count = count(family, classes, components, dim)?;
        let ratio = if family == ClassifierFamily::DgmmcS {
            None
        } else {
            let base = count(ClassifierFamily::DgmmcS, classes, components, dim)?;
            Some(parameter_count as f64 / base as f64)
        };
        Ok(Self {
            family,
            classes,
            components,
            dim,
            parameter_count,
            ratio,
        })
    }

    /// Ratio in printed form, see [`format_ratio`].
    pub fn ratio_text(&self) -> Option<String> {
        self.ratio.map(format_ratio)
    }
}

/// `(C, d)` columns of the comparison table.
pub const TABLE_COLUMNS: [(u64, u64); 8] = [
    (10, 2),
    (10, 10),
    (100, 32),
    (100, 100),
    (1000, 128),
    (1000, 768),
    (1000, 1000),
    (1000, 1024),
];

/// Every cell of the comparison table: for each column and `G ∈ {1, 2}`,
/// the SDGM-F ratio, the SDGM-D ratio and the DGMMC-S count.
pub fn ratio_table() -> Vec<CountReport> {
    let mut out = Vec::with_capacity(TABLE_COLUMNS.len() * 6);
    for family in [ClassifierFamily::SdgmF, ClassifierFamily::SdgmD, ClassifierFamily::DgmmcS] {
        for g in [1, 2] {
            for &(c, d) in &TABLE_COLUMNS {
                out.push(CountReport::new(family, c, g, d).expect("table cells are in domain"));
            }
        }
    }
    out
}

/// Table formatting of a ratio: two decimals below 100, one decimal from
/// 100 on, trailing zeros and a bare point dropped (`2.00` → `2`,
/// `100.50` → `100.5`).
pub fn format_ratio(r: f64) -> String {
    let decimals: i32 = if r < 100.0 { 2 } else { 1 };
    let scale = if decimals == 2 { 100.0 } else { 10.0 };
    let rounded = float::round(r * scale) / scale;
    let mut s = format!("{:.*}", decimals as usize, rounded);
    while s.ends_with('0') {
        s.pop();
    }
    if s.ends_with('.') {
        s.pop();
    }
    s
}

/// One point of an accuracy versus variance-ratio sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub classifier: String,
    pub family: String,
    pub threshold_percent: f64,
    pub selected_d: usize,
    pub accuracy: f64,
}

/// Best point per classifier, in order of first appearance.
pub fn sweep_summary(points: &[SweepPoint]) -> Vec<&SweepPoint> {
    let mut best: Vec<&SweepPoint> = Vec::new();
    for p in points {
        match best.iter_mut().find(|b| b.classifier == p.classifier) {
            Some(b) => {
                if p.accuracy > b.accuracy {
                    *b = p;
                }
            }
            None => best.push(p),
        }
    }
    best
}

/// Thresholds 5 %, 10 %, …, 100 %.
pub fn default_sweep_thresholds() -> Vec<f64> {
    (1..=20).map(|k| k as f64 * 0.05).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use CovarianceFamily::*;

    #[test]
    fn dgmmc_examples() {
        assert_eq!(count_dgmmc(Spherical, 10, 1, 2).unwrap(), 40);
        assert_eq!(count_dgmmc(Spherical, 10, 2, 10).unwrap(), 250);
        assert_eq!(count_dgmmc(Spherical, 10, 2, 10).unwrap(), 10 * (2 * 12 + 1));
        assert_eq!(count_dgmmc(Spherical, 1000, 2, 1024).unwrap(), 2_053_000);
        assert_eq!(count_dgmmc(Diagonal, 10, 1, 2).unwrap(), 20 + 10 + 20);
        assert_eq!(count_dgmmc(Full, 10, 2, 3).unwrap(), 60 + 10 + 20 + 180);
        assert!(count_dgmmc(Spherical, 1, 1, 2).is_err());
    }

    #[test]
    fn sdgm_examples() {
        let r = CountReport::new(ClassifierFamily::SdgmD, 10, 1, 10).unwrap();
        assert_eq!(r.parameter_count, 410);
        assert_eq!(r.ratio_text().unwrap(), "3.42");
        let r = CountReport::new(ClassifierFamily::SdgmF, 10, 1, 2).unwrap();
        assert_eq!(r.parameter_count, 110);
        assert_eq!(r.ratio, Some(2.75));
        let r = CountReport::new(ClassifierFamily::SdgmF, 100, 1, 32).unwrap();
        assert_eq!(r.parameter_count, 112_100);
        assert_eq!(r.ratio_text().unwrap(), "32.97");
        assert!(count_sdgm(Spherical, 10, 1, 2).is_err());
    }

    #[test]
    fn ratio_formatting() {
        assert_eq!(format_ratio(2.0), "2");
        assert_eq!(format_ratio(3.416_666), "3.42");
        assert_eq!(format_ratio(100.497_6), "100.5");
        assert_eq!(format_ratio(100.990_1), "101");
        assert_eq!(format_ratio(2.75), "2.75");
    }

    #[test]
    fn table_shape() {
        let t = ratio_table();
        assert_eq!(t.len(), 48);
        assert_eq!(t.iter().filter(|r| r.ratio.is_some()).count(), 32);
    }

    #[test]
    fn sweep_helpers() {
        let th = default_sweep_thresholds();
        assert_eq!(th.len(), 20);
        assert!((th[0] - 0.05).abs() < 1e-15 && (th[19] - 1.0).abs() < 1e-15);
        let pts = [
            SweepPoint { classifier: "a".into(), family: "s".into(), threshold_percent: 5.0, selected_d: 1, accuracy: 0.5 },
            SweepPoint { classifier: "a".into(), family: "s".into(), threshold_percent: 10.0, selected_d: 2, accuracy: 0.7 },
            SweepPoint { classifier: "b".into(), family: "d".into(), threshold_percent: 5.0, selected_d: 1, accuracy: 0.6 },
        ];
        let s = sweep_summary(&pts);
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].selected_d, 2);
    }
}
