//! Moderate / negligible classification of nets through the growth
//! indicator G(ε) = ε^a · ln sup |∂^α f_ε|, a = 1/(2s−1).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lstsq::least_squares;
use crate::net::{multi_indices, order_of, spectral_derivative, BoxRegion, EpsilonLadder, GeneralizedScalar, GevreyOrder, Grid, MultiIndex, SampledNet};

/// Indicator value recorded when the sup is exactly zero.
pub const SENTINEL: f64 = f64::NEG_INFINITY;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthClass {
    Negligible,
    Moderate,
    NonModerate,
}

impl std::fmt::Display for GrowthClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            GrowthClass::Negligible => "negligible",
            GrowthClass::Moderate => "moderate",
            GrowthClass::NonModerate => "non_moderate",
        })
    }
}

/// Analysis of one indicator series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesAnalysis {
    pub alpha: MultiIndex,
    /// (ε, G(ε)); G = −∞ when the sup vanishes.
    pub series: Vec<(f64, f64)>,
    /// Coefficient of ε^{−a} in ln sup, clamped at 0.
    pub slope: f64,
    pub intercept: f64,
    /// Coefficient of ln(1/ε) (polynomial growth), ≥ 0.
    pub log_power: f64,
    pub residual: f64,
    pub negligible: bool,
    pub bounded: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthVerdict {
    pub class: GrowthClass,
    /// Largest fitted growth rate against ε^{−a} over the tested α.
    pub fitted_k: f64,
    pub fitted_c: f64,
    /// Indicator series of α = 0.
    pub indicator_series: Vec<(f64, f64)>,
    pub per_alpha: Vec<SeriesAnalysis>,
}

/// Decision thresholds for [`Classifier::classify_net`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Classifier {
    pub alpha_max: usize,
    /// Negligibility witness: the final indicator value must be below −k_min.
    pub k_min: f64,
    /// Largest residual (log units) of the moderate-growth fit.
    pub moderate_residual: f64,
}

impl Default for Classifier {
    fn default() -> Self {
        Self {
            alpha_max: 2,
            k_min: 3.0,
            moderate_residual: 0.5,
        }
    }
}

fn region_nodes(grid: &Grid, region: &BoxRegion) -> Result<Vec<usize>> {
    if region.dim() != grid.dim() {
        return Err(Error::Domain("region dimension differs from the grid".into()));
    }
    let l = grid.half_length();
    if region.lo.iter().any(|&v| v < -l) || region.hi.iter().any(|&v| v > l) {
        return Err(Error::Domain("region exceeds the grid domain".into()));
    }
    let nodes: Vec<usize> = (0..grid.len()).filter(|&i| region.contains(&grid.point(i)[..grid.dim()])).collect();
    if nodes.is_empty() {
        return Err(Error::Domain("region contains no grid node".into()));
    }
    Ok(nodes)
}

fn indicator(order: GevreyOrder, eps: f64, sup: f64) -> f64 {
    if sup > 0.0 {
        eps.powf(order.a()) * sup.ln()
    } else {
        SENTINEL
    }
}

/// Tail of the series strictly decreasing (sentinels after sentinels
/// allowed) with final value below −k_min.
pub fn negligible_trend(series: &[(f64, f64)], k_min: f64) -> bool {
    let n = series.len();
    if n == 0 {
        return false;
    }
    let m = 2.max(n.div_ceil(3)).min(n);
    let tail = &series[n - m..];
    let decreasing = tail.windows(2).all(|w| w[1].1 < w[0].1 || w[1].1 == SENTINEL);
    decreasing && tail[m - 1].1 < -k_min
}

impl Classifier {
    /// G(ε) for every ladder entry, the sup taken over grid nodes in `region`.
    pub fn growth_indicator(&self, net: &SampledNet, alpha: &[usize], region: &BoxRegion) -> Result<Vec<(f64, f64)>> {
        let nodes = region_nodes(net.grid(), region)?;
        let order = order_of(alpha);
        if order > self.alpha_max {
            return Err(Error::UnsupportedOrder { order, max: self.alpha_max });
        }
        let derived;
        let src = if order == 0 {
            net
        } else {
            derived = spectral_derivative(net, alpha)?;
            &derived
        };
        Ok(net
            .ladder()
            .values()
            .iter()
            .zip(src.samples())
            .map(|(&e, slice)| {
                let sup = nodes.iter().map(|&i| slice[i].norm()).fold(0.0, f64::max);
                (e, indicator(net.order(), e, sup))
            })
            .collect())
    }

    /// Negligibility trend and moderate-growth fit of one series.
    pub fn analyze(&self, order: GevreyOrder, alpha: MultiIndex, series: Vec<(f64, f64)>) -> SeriesAnalysis {
        let negligible = negligible_trend(&series, self.k_min);
        let mut x = Vec::new();
        let mut z = Vec::new();
        let mut y = Vec::new();
        for &(e, g) in &series {
            if g.is_finite() {
                x.push(e.powf(-order.a()));
                z.push((1.0 / e).ln());
                y.push(g / e.powf(order.a()));
            }
        }
        let ones = vec![1.0; y.len()];
        let mut fit = None;
        if y.len() >= 4 {
            if let Some((c, r)) = least_squares(&[&ones, &x, &z], &y) {
                if c[2] >= 0.0 {
                    fit = Some((c[0], c[1], c[2], r));
                }
            }
        }
        if fit.is_none() && y.len() >= 3 {
            fit = least_squares(&[&ones, &x], &y).map(|(c, r)| (c[0], c[1], 0.0, r));
        }
        let (intercept, slope, log_power, residual) = fit.unwrap_or((y.first().copied().unwrap_or(0.0), 0.0, 0.0, 0.0));
        let fitted = y.len() >= 3 && residual <= self.moderate_residual;
        SeriesAnalysis {
            alpha,
            series,
            slope: slope.max(0.0),
            intercept,
            log_power,
            residual,
            negligible,
            bounded: negligible || fitted,
        }
    }

    fn verdict(per_alpha: Vec<SeriesAnalysis>) -> GrowthVerdict {
        let class = if per_alpha.iter().all(|a| a.negligible) {
            GrowthClass::Negligible
        } else if per_alpha.iter().all(|a| a.bounded) {
            GrowthClass::Moderate
        } else {
            GrowthClass::NonModerate
        };
        GrowthVerdict {
            class,
            fitted_k: per_alpha.iter().map(|a| a.slope).fold(0.0, f64::max),
            fitted_c: per_alpha.iter().map(|a| a.intercept).fold(f64::NEG_INFINITY, f64::max),
            indicator_series: per_alpha[0].series.clone(),
            per_alpha,
        }
    }

    /// Classifies a net over every |α| ≤ alpha_max on `region`.
    pub fn classify_net(&self, net: &SampledNet, region: &BoxRegion) -> Result<GrowthVerdict> {
        if net.ladder().len() < EpsilonLadder::MIN_LEN {
            return Err(Error::Precondition("ladder needs at least 4 entries".into()));
        }
        let mut per_alpha = Vec::new();
        for alpha in multi_indices(net.grid().dim(), self.alpha_max) {
            let series = self.growth_indicator(net, &alpha, region)?;
            per_alpha.push(self.analyze(net.order(), alpha, series));
        }
        Ok(Self::verdict(per_alpha))
    }

    /// Classifies a generalized number (a single point, α = 0).
    pub fn classify_scalar(&self, x: &GeneralizedScalar) -> GrowthVerdict {
        let series = x
            .ladder
            .values()
            .iter()
            .zip(&x.values)
            .map(|(&e, v)| (e, indicator(x.order, e, v.norm())))
            .collect();
        Self::verdict(vec![self.analyze(x.order, vec![0], series)])
    }
}

/// Classifies `net` over the whole grid domain with default thresholds.
pub fn classify_net(net: &SampledNet, alpha_max: usize, region: &BoxRegion) -> Result<GrowthVerdict> {
    Classifier {
        alpha_max,
        ..Classifier::default()
    }
    .classify_net(net, region)
}

pub fn classify_scalar(x: &GeneralizedScalar) -> GrowthVerdict {
    Classifier {
        alpha_max: 0,
        ..Classifier::default()
    }
    .classify_scalar(x)
}

/// Nets constant in x with closed-form ε dependence.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum ClosedForm {
    /// exp(−1/ε)
    ExpNegInv,
    /// 1
    One,
    /// exp(1/ε)
    ExpInv,
    /// exp(ε^{−a}), a = 1/(2s−1)
    ExpGrowthRate,
    /// ε^{−p}
    Power { p: f64 },
}

impl ClosedForm {
    pub fn value(&self, order: GevreyOrder, eps: f64) -> f64 {
        match *self {
            ClosedForm::ExpNegInv => (-1.0 / eps).exp(),
            ClosedForm::One => 1.0,
            ClosedForm::ExpInv => (1.0 / eps).exp(),
            ClosedForm::ExpGrowthRate => eps.powf(-order.a()).exp(),
            ClosedForm::Power { p } => eps.powf(-p),
        }
    }

    /// Exact G(ε) = ε^a ln(value).
    pub fn indicator(&self, order: GevreyOrder, eps: f64) -> f64 {
        let ln = match *self {
            ClosedForm::ExpNegInv => -1.0 / eps,
            ClosedForm::One => 0.0,
            ClosedForm::ExpInv => 1.0 / eps,
            ClosedForm::ExpGrowthRate => eps.powf(-order.a()),
            ClosedForm::Power { p } => -p * eps.ln(),
        };
        eps.powf(order.a()) * ln
    }

    pub fn net(&self, order: GevreyOrder, ladder: EpsilonLadder, grid: Grid) -> Result<SampledNet> {
        let law = *self;
        SampledNet::from_fn(order, ladder, grid, move |e, _| Complex64::new(law.value(order, e), 0.0))
    }

    pub fn scalar(&self, order: GevreyOrder, ladder: EpsilonLadder) -> Result<GeneralizedScalar> {
        let law = *self;
        GeneralizedScalar::from_fn(order, ladder, move |e| Complex64::new(law.value(order, e), 0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (GevreyOrder, EpsilonLadder, Grid) {
        (
            GevreyOrder::new(2.0).unwrap(),
            EpsilonLadder::geometric(2.0, 2, 6).unwrap(),
            Grid::new(1, 4.0, 64).unwrap(),
        )
    }

    #[test]
    fn closed_form_indicators() {
        let (o, l, g) = setup();
        let c = Classifier::default();
        let dom = BoxRegion::domain(&g);
        for law in [ClosedForm::ExpGrowthRate, ClosedForm::One, ClosedForm::ExpNegInv] {
            let net = law.net(o, l.clone(), g).unwrap();
            let s = c.growth_indicator(&net, &[0], &dom).unwrap();
            for (e, v) in s {
                let want = law.indicator(o, e);
                assert!((v - want).abs() <= 1e-6 * want.abs().max(1e-300) + 1e-15, "{law:?} {e} {v} {want}");
            }
        }
        // exp(ε^{−a}) has G ≡ 1
        let net = ClosedForm::ExpGrowthRate.net(o, l, g).unwrap();
        for (_, v) in c.growth_indicator(&net, &[0], &dom).unwrap() {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn three_classes() {
        let (o, l, g) = setup();
        let dom = BoxRegion::domain(&g);
        let class = |law: ClosedForm| classify_net(&law.net(o, l.clone(), g).unwrap(), 2, &dom).unwrap();
        assert_eq!(class(ClosedForm::ExpNegInv).class, GrowthClass::Negligible);
        let one = class(ClosedForm::One);
        assert_eq!(one.class, GrowthClass::Moderate);
        assert!(one.fitted_k.abs() < 1e-9);
        assert_eq!(class(ClosedForm::ExpInv).class, GrowthClass::NonModerate);
    }

    #[test]
    fn scalar_classes() {
        let (o, l, _) = setup();
        let class = |law: ClosedForm| classify_scalar(&law.scalar(o, l.clone()).unwrap()).class;
        assert_eq!(class(ClosedForm::ExpNegInv), GrowthClass::Negligible);
        assert_eq!(class(ClosedForm::Power { p: 5.0 }), GrowthClass::Moderate);
        assert_eq!(class(ClosedForm::ExpInv), GrowthClass::NonModerate);
    }

    #[test]
    fn zero_net_is_negligible_by_sentinel() {
        let (o, l, g) = setup();
        let z = SampledNet::from_fn(o, l, g, |_, _| Complex64::new(0.0, 0.0)).unwrap();
        let v = classify_net(&z, 1, &BoxRegion::domain(&g)).unwrap();
        assert_eq!(v.class, GrowthClass::Negligible);
        assert!(v.indicator_series.iter().all(|p| p.1 == SENTINEL));
    }

    #[test]
    fn trend_rule() {
        let s = |v: &[f64]| v.iter().map(|&g| (0.1, g)).collect::<Vec<_>>();
        assert!(negligible_trend(&s(&[-1.0, -2.0, -3.5, -4.0, -5.0]), 3.0));
        assert!(!negligible_trend(&s(&[-1.0, -2.0, -3.5, -5.0, -5.0]), 3.0));
        assert!(!negligible_trend(&s(&[-1.0, -2.0, -2.5, -2.7, -2.9]), 3.0));
        assert!(negligible_trend(&s(&[-1.0, -2.0, -3.0, -4.0, SENTINEL]), 3.0));
        assert!(negligible_trend(&s(&[SENTINEL; 5]), 3.0));
    }

    #[test]
    fn region_errors() {
        let (o, l, g) = setup();
        let c = Classifier::default();
        let net = ClosedForm::One.net(o, l, g).unwrap();
        let tiny = BoxRegion::new(vec![0.01], vec![0.02]).unwrap();
        assert!(matches!(c.growth_indicator(&net, &[0], &tiny), Err(Error::Domain(_))));
        let outside = BoxRegion::new(vec![-5.0], vec![0.0]).unwrap();
        assert!(matches!(c.growth_indicator(&net, &[0], &outside), Err(Error::Domain(_))));
        assert!(matches!(
            c.growth_indicator(&net, &[3], &BoxRegion::domain(&g)),
            Err(Error::UnsupportedOrder { order: 3, max: 2 })
        ));
    }
}
