//! Principal components of label embeddings for 2-D plotting.
//!
//! Eigenpairs of the sample covariance come from power iteration with
//! deflation. Each component is sign-fixed so that its largest-magnitude
//! projected coordinate is positive.

use std::io::Write;

use crate::embeddings::{dot, norm};
use crate::error::{Error, Result};

pub const POWER_TOLERANCE: f64 = 1e-10;
pub const POWER_MAX_ITER: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct PcaResult {
    /// One row per input vector, one column per component.
    pub coordinates: Vec<Vec<f64>>,
    pub explained_variance_ratio: Vec<f64>,
    pub eigenvalues: Vec<f64>,
    /// Unit eigenvectors of the covariance, one per component.
    pub components: Vec<Vec<f64>>,
}

/// Sample covariance (divisor `n - 1`) of the rows, and the column means.
pub fn covariance(vectors: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let n = vectors.len();
    let d = vectors[0].len();
    let mut mean = vec![0.0; d];
    for v in vectors {
        mean.iter_mut().zip(v).for_each(|(m, x)| *m += x / n as f64);
    }
    let mut cov = vec![vec![0.0; d]; d];
    for v in vectors {
        let c: Vec<f64> = v.iter().zip(&mean).map(|(x, m)| x - m).collect();
        for (row, ci) in cov.iter_mut().zip(&c) {
            if *ci != 0.0 {
                row.iter_mut().zip(&c).for_each(|(x, cj)| *x += ci * cj);
            }
        }
    }
    let denom = (n - 1) as f64;
    cov.iter_mut().flatten().for_each(|x| *x /= denom);
    (cov, mean)
}

fn mat_vec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter().map(|row| dot(row, v)).collect()
}

/// Dominant eigenpair of a symmetric positive semi-definite matrix.
fn power_iteration(m: &[Vec<f64>], start: usize) -> (f64, Vec<f64>) {
    let d = m.len();
    // Deterministic start that is unlikely to be orthogonal to the top
    // eigenvector; rotated per component.
    let mut v: Vec<f64> = (0..d).map(|i| 1.0 + ((i + start) % 7) as f64 * 0.1).collect();
    let n0 = norm(&v);
    v.iter_mut().for_each(|x| *x /= n0);
    let mut lambda = 0.0;
    for _ in 0..POWER_MAX_ITER {
        let w = mat_vec(m, &v);
        let nw = norm(&w);
        if nw == 0.0 {
            return (0.0, v);
        }
        let next: Vec<f64> = w.iter().map(|x| x / nw).collect();
        let diff = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = next;
        lambda = dot(&v, &mat_vec(m, &v));
        if diff < POWER_TOLERANCE {
            break;
        }
    }
    (lambda, v)
}

/// Projects `vectors` onto their top `n_components` principal axes.
pub fn pca_project(vectors: &[Vec<f64>], n_components: usize) -> Result<PcaResult> {
    if vectors.len() < 2 {
        return Err(Error::invalid("PCA needs at least two vectors"));
    }
    let d = vectors[0].len();
    if let Some(bad) = vectors.iter().find(|v| v.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            actual: bad.len(),
        });
    }
    if n_components == 0 || n_components > d {
        return Err(Error::invalid(format!(
            "{n_components} components requested for dimension {d}"
        )));
    }
    let (mut cov, mean) = covariance(vectors);
    let trace: f64 = (0..d).map(|i| cov[i][i]).sum();
    if trace <= 0.0 {
        return Err(Error::invalid("input has zero variance"));
    }
    let centered: Vec<Vec<f64>> = vectors
        .iter()
        .map(|v| v.iter().zip(&mean).map(|(x, m)| x - m).collect())
        .collect();

    let mut eigenvalues = Vec::with_capacity(n_components);
    let mut components = Vec::with_capacity(n_components);
    for k in 0..n_components {
        let (lambda, mut v) = power_iteration(&cov, k);
        let lambda = lambda.max(0.0);
        let proj: Vec<f64> = centered.iter().map(|c| dot(c, &v)).collect();
        let extreme = proj
            .iter()
            .copied()
            .fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
        if extreme < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        for i in 0..d {
            for j in 0..d {
                cov[i][j] -= lambda * v[i] * v[j];
            }
        }
        eigenvalues.push(lambda);
        components.push(v);
    }
    let coordinates = centered
        .iter()
        .map(|c| components.iter().map(|v| dot(c, v)).collect())
        .collect();
    Ok(PcaResult {
        coordinates,
        explained_variance_ratio: eigenvalues.iter().map(|l| l / trace).collect(),
        eigenvalues,
        components,
    })
}

/// CSV `label,pc1,pc2,...` followed by `# explained_variance: r1,r2,...`.
pub fn write_pca_csv<W: Write>(mut w: W, labels: &[String], result: &PcaResult) -> std::io::Result<()> {
    let k = result.explained_variance_ratio.len();
    let header: Vec<String> = (1..=k).map(|i| format!("pc{i}")).collect();
    writeln!(w, "label,{}", header.join(","))?;
    for (label, coords) in labels.iter().zip(&result.coordinates) {
        let label = if label.contains([',', '"']) {
            format!("\"{}\"", label.replace('"', "\"\""))
        } else {
            label.clone()
        };
        let cs: Vec<String> = coords.iter().map(|c| format!("{c:.10}")).collect();
        writeln!(w, "{label},{}", cs.join(","))?;
    }
    let rs: Vec<String> = result
        .explained_variance_ratio
        .iter()
        .map(|r| format!("{r:.10}"))
        .collect();
    writeln!(w, "# explained_variance: {}", rs.join(","))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    /// Closed-form eigenvalues of a symmetric 2x2 matrix, largest first.
    fn eig2(m: &[Vec<f64>]) -> (f64, f64) {
        let (a, b, c) = (m[0][0], m[0][1], m[1][1]);
        let mid = (a + c) / 2.0;
        let r = (((a - c) / 2.0).powi(2) + b * b).sqrt();
        (mid + r, mid - r)
    }

    #[test]
    fn three_point_fixture() {
        let pts = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 2.0]];
        let (cov, _) = covariance(&pts);
        let (l1, l2) = eig2(&cov);
        let oracle = l1 / (l1 + l2);
        assert_abs_diff_eq!(oracle, (5.0 + 13f64.sqrt()) / 10.0, epsilon = 1e-12);
        let r = pca_project(&pts, 2).unwrap();
        assert_abs_diff_eq!(r.explained_variance_ratio[0], oracle, epsilon = 1e-9);
        assert_abs_diff_eq!(r.explained_variance_ratio.iter().sum::<f64>(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn collinear_points() {
        let pts: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64, 2.0 * i as f64, -(i as f64)]).collect();
        let r = pca_project(&pts, 2).unwrap();
        assert_abs_diff_eq!(r.explained_variance_ratio[0], 1.0, epsilon = 1e-9);
        assert!(r.explained_variance_ratio[1].abs() < 1e-9);
    }

    #[test]
    fn errors() {
        assert!(pca_project(&[vec![1.0, 2.0]], 1).is_err());
        assert!(pca_project(&[vec![1.0, 2.0], vec![1.0, 2.0]], 1).is_err());
        assert!(pca_project(&[vec![1.0, 2.0], vec![0.0, 2.0]], 3).is_err());
    }

    #[test]
    fn csv_layout() {
        let pts = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 2.0]];
        let r = pca_project(&pts, 2).unwrap();
        let mut buf = Vec::new();
        write_pca_csv(&mut buf, &["a".into(), "b".into(), "c".into()], &r).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "label,pc1,pc2");
        assert_eq!(lines.len(), 5);
        assert!(lines[4].starts_with("# explained_variance: 0.86"));
    }

    proptest! {
        #[test]
        fn ratios_ordered_and_translation_invariant(
            pts in proptest::collection::vec(proptest::collection::vec(-5.0f64..5.0, 3), 4..8),
            shift in proptest::collection::vec(-10.0f64..10.0, 3),
        ) {
            let r = match pca_project(&pts, 2) {
                Ok(r) => r,
                Err(_) => return Ok(()),
            };
            let ratios = &r.explained_variance_ratio;
            prop_assert!(ratios.iter().all(|x| (-1e-12..=1.0 + 1e-12).contains(x)));
            prop_assert!(ratios[0] + 1e-9 >= ratios[1]);
            prop_assert!(ratios.iter().sum::<f64>() <= 1.0 + 1e-9);
            // A well-separated spectrum keeps the axes (and signs) stable.
            let (cov, _) = covariance(&pts);
            let gaps_ok = r.eigenvalues[0] - r.eigenvalues[1] > 1e-3
                && (0..3).map(|i| cov[i][i]).sum::<f64>() - r.eigenvalues[0] - r.eigenvalues[1] < r.eigenvalues[1] - 1e-3;
            prop_assume!(gaps_ok);
            let moved: Vec<Vec<f64>> = pts.iter().map(|p| p.iter().zip(&shift).map(|(a, b)| a + b).collect()).collect();
            let m = pca_project(&moved, 2).unwrap();
            for (a, b) in r.coordinates.iter().flatten().zip(m.coordinates.iter().flatten()) {
                prop_assert!((a - b).abs() < 1e-6);
            }
        }
    }
}
