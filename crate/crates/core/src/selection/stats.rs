//! Correlations, divergences and simple summary statistics.

use crate::error::{Error, Result};

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::Misaligned {
            expected: x.len(),
            found: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::EmptyInput("correlation needs at least two points"));
    }
    Ok(())
}

/// Pearson product-moment correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Average ranks (1-based), ties share the mean of their positions.
pub fn ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut out = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation (Pearson on average ranks).
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    pearson(&ranks(x), &ranks(y))
}

/// Kendall's tau-b.
pub fn kendall_tau(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    let (mut concordant, mut discordant, mut ties_x, mut ties_y) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            let dx = x[i].total_cmp(&x[j]) as i64;
            let dy = y[i].total_cmp(&y[j]) as i64;
            match (dx, dy) {
                (0, 0) => {}
                (0, _) => ties_x += 1,
                (_, 0) => ties_y += 1,
                _ if dx == dy => concordant += 1,
                _ => discordant += 1,
            }
        }
    }
    let denom = (((concordant + discordant + ties_x) * (concordant + discordant + ties_y)) as f64).sqrt();
    if denom == 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok((concordant - discordant) as f64 / denom)
}

/// Ordinary least-squares line `y = slope·x + intercept`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Regression {
    pub slope: f64,
    pub intercept: f64,
}

/// Fails when `x` has zero variance (the slope is undefined).
pub fn least_squares(x: &[f64], y: &[f64]) -> Result<Regression> {
    check_pair(x, y)?;
    let (mx, my) = (mean(x), mean(y));
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::ZeroVariance);
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Ok(Regression {
        slope,
        intercept: my - slope * mx,
    })
}

/// Discrete distribution over named categories.
#[derive(Clone, Debug, PartialEq)]
pub struct Distribution {
    pub categories: Vec<String>,
    pub weights: Vec<f64>,
}

impl Distribution {
    /// Relative frequencies of `labels` over `categories`.
    pub fn from_labels<S: AsRef<str>>(categories: &[&str], labels: &[S]) -> Self {
        let weights = categories
            .iter()
            .map(|c| labels.iter().filter(|l| l.as_ref() == *c).count() as f64)
            .collect();
        Distribution {
            categories: categories.iter().map(|c| c.to_string()).collect(),
            weights,
        }
    }
}

/// `D_KL(p || q)` in nats after adding `epsilon` to every category and renormalizing.
pub fn kl_divergence(p: &Distribution, q: &Distribution, epsilon: f64) -> Result<f64> {
    if p.categories != q.categories || p.weights.len() != p.categories.len() || q.weights.len() != q.categories.len()
    {
        return Err(Error::CategoryMismatch);
    }
    if p.categories.is_empty() {
        return Err(Error::EmptyInput("distribution"));
    }
    if epsilon < 0.0 || p.weights.iter().chain(&q.weights).any(|w| *w < 0.0 || !w.is_finite()) {
        return Err(Error::config("distribution weights and epsilon must be non-negative"));
    }
    let smooth = |w: &[f64]| -> Result<Vec<f64>> {
        let total: f64 = w.iter().map(|v| v + epsilon).sum();
        if total <= 0.0 {
            return Err(Error::EmptyInput("distribution with zero mass"));
        }
        Ok(w.iter().map(|v| (v + epsilon) / total).collect())
    };
    let (ps, qs) = (smooth(&p.weights)?, smooth(&q.weights)?);
    Ok(ps
        .iter()
        .zip(&qs)
        .filter(|(pi, _)| **pi > 0.0)
        .map(|(pi, qi)| pi * (pi / qi).ln())
        .sum::<f64>()
        .max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pearson_examples() {
        assert!((pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((pearson(&[1.0, 2.0, 3.0], &[6.0, 4.0, 2.0]).unwrap() + 1.0).abs() < 1e-12);
        assert!((pearson(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap() - 0.8).abs() < 1e-12);
    }

    #[test]
    fn pearson_errors() {
        assert!(matches!(pearson(&[1.0, 1.0], &[1.0, 2.0]), Err(Error::ZeroVariance)));
        assert!(pearson(&[1.0], &[1.0]).is_err());
        assert!(pearson(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn rank_correlations() {
        assert_eq!(ranks(&[10.0, 30.0, 20.0, 20.0]), vec![1.0, 4.0, 2.5, 2.5]);
        assert!((spearman(&[1.0, 2.0, 3.0], &[1.0, 8.0, 27.0]).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(kendall_tau(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(), -1.0);
        // one discordant pair out of three
        assert!((kendall_tau(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]).unwrap() - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn regression_examples() {
        let r = least_squares(&[0.0, 1.0], &[0.0, 1.0]).unwrap();
        assert_eq!((r.slope, r.intercept), (1.0, 0.0));
        let r = least_squares(&[0.0, 1.0, 2.0], &[5.0, 5.0, 5.0]).unwrap();
        assert_eq!((r.slope, r.intercept), (0.0, 5.0));
        assert!(least_squares(&[1.0, 1.0], &[0.0, 1.0]).is_err());
    }

    fn dist(w: &[f64]) -> Distribution {
        Distribution {
            categories: (0..w.len()).map(|i| format!("c{i}")).collect(),
            weights: w.to_vec(),
        }
    }

    #[test]
    fn kl_examples() {
        assert_eq!(kl_divergence(&dist(&[0.3, 0.7]), &dist(&[0.3, 0.7]), 1e-6).unwrap(), 0.0);
        let expected = 0.5 * 2f64.ln() + 0.5 * (2.0f64 / 3.0).ln();
        let got = kl_divergence(&dist(&[0.5, 0.5]), &dist(&[0.25, 0.75]), 0.0).unwrap();
        assert!((got - expected).abs() < 1e-12);
        assert!((got - 0.143_841).abs() < 1e-6);
        let finite = kl_divergence(&dist(&[0.5, 0.5]), &dist(&[1.0, 0.0]), 1e-6).unwrap();
        assert!(finite.is_finite() && finite > 0.0);
    }

    #[test]
    fn kl_category_mismatch() {
        let mut q = dist(&[0.5, 0.5]);
        q.categories[1] = "other".into();
        assert!(matches!(
            kl_divergence(&dist(&[0.5, 0.5]), &q, 1e-6),
            Err(Error::CategoryMismatch)
        ));
    }

    #[test]
    fn std_dev_basics() {
        assert_eq!(std_dev(&[2.0]), 0.0);
        assert!((std_dev(&[1.0, 3.0]) - 2f64.sqrt()).abs() < 1e-12);
    }

    proptest::proptest! {
        #[test]
        fn pearson_is_affine_invariant(
            xy in proptest::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 3..30),
            a in 0.01f64..100.0,
            b in -100.0f64..100.0,
        ) {
            let (x, y): (Vec<f64>, Vec<f64>) = xy.into_iter().unzip();
            if let Ok(r) = pearson(&x, &y) {
                let scaled: Vec<f64> = x.iter().map(|v| a * v + b).collect();
                if let Ok(r2) = pearson(&scaled, &y) {
                    proptest::prop_assert!((r - r2).abs() < 1e-9, "{} vs {}", r, r2);
                    let r3 = pearson(&y, &scaled).unwrap();
                    proptest::prop_assert!((r - r3).abs() < 1e-9);
                }
                proptest::prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&r));
            }
        }

        #[test]
        fn kl_is_non_negative_and_zero_on_equal(
            p in proptest::collection::vec(0.0f64..10.0, 1..6),
            q in proptest::collection::vec(0.0f64..10.0, 1..6),
            epsilon in 1e-6f64..1.0,
        ) {
            let k = p.len().min(q.len());
            let categories: Vec<String> = (0..k).map(|i| format!("c{i}")).collect();
            let dist = |w: &[f64]| Distribution { categories: categories.clone(), weights: w[..k].to_vec() };
            let (p, q) = (dist(&p), dist(&q));
            proptest::prop_assert!(kl_divergence(&p, &q, epsilon).unwrap() >= 0.0);
            proptest::prop_assert_eq!(kl_divergence(&p, &p, epsilon).unwrap(), 0.0);
        }
    }
}
