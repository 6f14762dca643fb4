//! Discretized first-kind Fredholm test problems, a relative noise model and
//! synthetic problems satisfying a source condition.

use std::f64::consts::PI;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dist, mtx, norm2, DenseMatrix};
use crate::smoothing::WeightedPinv;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemName {
    Baart,
    Deriv2,
    Foxgood,
    Gravity,
    Heat,
    Phillips,
    Shaw,
}

impl ProblemName {
    pub const ALL: [ProblemName; 7] = [
        ProblemName::Baart,
        ProblemName::Deriv2,
        ProblemName::Foxgood,
        ProblemName::Gravity,
        ProblemName::Heat,
        ProblemName::Phillips,
        ProblemName::Shaw,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ProblemName::Baart => "baart",
            ProblemName::Deriv2 => "deriv2",
            ProblemName::Foxgood => "foxgood",
            ProblemName::Gravity => "gravity",
            ProblemName::Heat => "heat",
            ProblemName::Phillips => "phillips",
            ProblemName::Shaw => "shaw",
        }
    }

    /// Exponentially decaying singular values.
    pub fn is_severely_ill_posed(self) -> bool {
        matches!(
            self,
            ProblemName::Baart | ProblemName::Foxgood | ProblemName::Gravity | ProblemName::Shaw
        )
    }

    /// Scale relating a solution entry to the value of the continuous solution
    /// at the matching grid point. Galerkin discretizations with normalized
    /// box functions carry a factor `sqrt(h)`.
    pub fn basis_scale(self, n: usize) -> f64 {
        match self {
            ProblemName::Baart => (PI / n as f64).sqrt(),
            ProblemName::Deriv2 => (1.0 / n as f64).sqrt(),
            ProblemName::Phillips => (12.0 / n as f64).sqrt(),
            _ => 1.0,
        }
    }

    /// Required divisor of `n`.
    pub fn size_multiple(self) -> usize {
        match self {
            ProblemName::Baart | ProblemName::Shaw | ProblemName::Heat => 2,
            ProblemName::Phillips => 4,
            _ => 1,
        }
    }
}

impl fmt::Display for ProblemName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProblemName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ProblemName::ALL
            .iter()
            .copied()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::UnknownProblem {
                name: s.to_string(),
                valid: ProblemName::ALL.map(|p| p.as_str()).join(", "),
            })
    }
}

/// Smallest supported dimension.
pub const MIN_SIZE: usize = 8;

/// Operator, exact solution and exact data `b = A x` of a named problem.
pub fn generate(name: ProblemName, n: usize) -> Result<(DenseMatrix, Vec<f64>, Vec<f64>)> {
    if n < MIN_SIZE || n % name.size_multiple() != 0 {
        return Err(Error::InvalidArgument(format!(
            "{name} needs n >= {MIN_SIZE} and divisible by {}, got {n}",
            name.size_multiple()
        )));
    }
    let (a, x) = match name {
        ProblemName::Baart => baart(n),
        ProblemName::Deriv2 => deriv2(n),
        ProblemName::Foxgood => foxgood(n),
        ProblemName::Gravity => gravity(n),
        ProblemName::Heat => heat(n),
        ProblemName::Phillips => phillips(n),
        ProblemName::Shaw => shaw(n),
    };
    let b = a.matvec(&x);
    Ok((a, x, b))
}

/// Kernel `exp(s cos t)` on `[0, pi/2] x [0, pi]`, Galerkin in `s`,
/// Simpson's rule in `t`.
fn baart(n: usize) -> (DenseMatrix, Vec<f64>) {
    let hs = PI / (2.0 * n as f64);
    let ht = PI / n as f64;
    let c = 1.0 / (3.0 * 2f64.sqrt());
    let s: Vec<f64> = (0..=n).map(|i| i as f64 * hs).collect();
    let strip = |co: f64| -> Vec<f64> {
        (0..n)
            .map(|i| ((s[i + 1] * co).exp() - (s[i] * co).exp()) / co)
            .collect()
    };
    let mut a = DenseMatrix::zeros(n, n);
    let mut f3: Vec<f64> = (0..n).map(|i| s[i + 1].exp() - s[i].exp()).collect();
    for j in 1..=n {
        let f1 = f3;
        let f2 = strip((((j as f64) - 0.5) * ht).cos());
        // cos(t) vanishes at t = pi/2 and the strip integral degenerates to hs.
        f3 = if j == n / 2 {
            vec![hs; n]
        } else {
            strip((j as f64 * ht).cos())
        };
        for i in 0..n {
            a[(i, j - 1)] = c * (f1[i] + 4.0 * f2[i] + f3[i]);
        }
    }
    let x = (1..=n)
        .map(|j| (((j - 1) as f64 * ht).cos() - (j as f64 * ht).cos()) / ht.sqrt())
        .collect();
    (a, x)
}

/// Green's function of `-u''` on `[0, 1]` with zero boundary values,
/// Galerkin discretization; solution `x(t) = t`.
fn deriv2(n: usize) -> (DenseMatrix, Vec<f64>) {
    let h = 1.0 / n as f64;
    let h2 = h * h;
    let mut a = DenseMatrix::zeros(n, n);
    for i in 1..=n {
        let fi = i as f64;
        a[(i - 1, i - 1)] = h2 * ((fi * fi - fi + 0.25) * h - (fi - 2.0 / 3.0));
        for j in 1..i {
            let v = h2 * (j as f64 - 0.5) * ((fi - 0.5) * h - 1.0);
            a[(i - 1, j - 1)] = v;
            a[(j - 1, i - 1)] = v;
        }
    }
    let h32 = h * h.sqrt();
    let x = (1..=n).map(|i| h32 * (i as f64 - 0.5)).collect();
    (a, x)
}

/// Kernel `sqrt(s^2 + t^2)` on `[0, 1]^2`, midpoint rule; solution `x(t) = t`.
fn foxgood(n: usize) -> (DenseMatrix, Vec<f64>) {
    let h = 1.0 / n as f64;
    let t: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) * h).collect();
    let a = DenseMatrix::from_fn(n, n, |i, j| h * (t[i] * t[i] + t[j] * t[j]).sqrt());
    (a, t)
}

/// Gravity surveying at depth 0.25, midpoint rule.
fn gravity(n: usize) -> (DenseMatrix, Vec<f64>) {
    let d = 0.25;
    let h = 1.0 / n as f64;
    let t: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) * h).collect();
    let a = DenseMatrix::from_fn(n, n, |i, j| {
        let r = d * d + (t[i] - t[j]).powi(2);
        h * d / r.powf(1.5)
    });
    let x = t
        .iter()
        .map(|&t| (PI * t).sin() + 0.5 * (2.0 * PI * t).sin())
        .collect();
    (a, x)
}

/// Inverse heat equation (Volterra kernel, unit diffusion), midpoint rule.
fn heat(n: usize) -> (DenseMatrix, Vec<f64>) {
    let h = 1.0 / n as f64;
    let c = h / (2.0 * PI.sqrt());
    let d = 0.25;
    let k: Vec<f64> = (0..n)
        .map(|i| {
            let t = (i as f64 + 0.5) * h;
            c * t.powf(-1.5) * (-d / t).exp()
        })
        .collect();
    let a = DenseMatrix::from_fn(n, n, |i, j| if i >= j { k[i - j] } else { 0.0 });
    let mut x = vec![0.0; n];
    for (i, xi) in x.iter_mut().enumerate().take(n / 2) {
        let ti = (i + 1) as f64 * 20.0 / n as f64;
        *xi = if ti < 2.0 {
            0.75 * ti * ti / 4.0
        } else if ti < 3.0 {
            0.75 + (ti - 2.0) * (3.0 - ti)
        } else {
            0.75 * (-(ti - 3.0) * 2.0).exp()
        };
    }
    (a, x)
}

/// Convolution with `1 + cos(pi t / 3)` on `[-6, 6]`, Galerkin.
fn phillips(n: usize) -> (DenseMatrix, Vec<f64>) {
    let h = 12.0 / n as f64;
    let n4 = n / 4;
    let theta = 4.0 * PI / n as f64;
    let w = 9.0 / (h * PI * PI);
    let mut r1 = vec![0.0; n];
    for (d, r) in r1.iter_mut().enumerate().take(n4) {
        let d = d as f64;
        *r = h + w
            * (2.0 * (d * theta).cos() - ((d - 1.0) * theta).cos() - ((d + 1.0) * theta).cos());
    }
    r1[n4] = h / 2.0 + w * (theta.cos() - 1.0);
    let a = DenseMatrix::from_fn(n, n, |i, j| r1[i.abs_diff(j)]);
    let sq = h.sqrt();
    let x = (0..n)
        .map(|j| {
            let lo = -6.0 + j as f64 * h;
            let hi = lo + h;
            if hi <= -3.0 + 1e-12 || lo >= 3.0 - 1e-12 {
                0.0
            } else {
                let f = |t: f64| t + 3.0 / PI * (PI * t / 3.0).sin();
                (f(hi) - f(lo)) / sq
            }
        })
        .collect();
    (a, x)
}

/// Image deblurring kernel `(cos s + cos t)^2 (sin u / u)^2`,
/// `u = pi (sin s + sin t)`, on `[-pi/2, pi/2]`, midpoint rule.
fn shaw(n: usize) -> (DenseMatrix, Vec<f64>) {
    let h = PI / n as f64;
    let s: Vec<f64> = (0..n).map(|i| -PI / 2.0 + (i as f64 + 0.5) * h).collect();
    let co: Vec<f64> = s.iter().map(|v| v.cos()).collect();
    let psi: Vec<f64> = s.iter().map(|v| PI * v.sin()).collect();
    let a = DenseMatrix::from_fn(n, n, |i, j| {
        let u = psi[i] + psi[j];
        let sinc = if u.abs() < 1e-300 { 1.0 } else { u.sin() / u };
        h * ((co[i] + co[j]) * sinc).powi(2)
    });
    let x = s
        .iter()
        .map(|&t| 2.0 * (-6.0 * (t - 0.8).powi(2)).exp() + (-2.0 * (t + 0.5).powi(2)).exp())
        .collect();
    (a, x)
}

/// Relative Gaussian noise: `b_i = b_i + delta * max|b| * xi_i`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub delta_rel: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(delta_rel: f64, seed: u64) -> Self {
        Self { delta_rel, seed }
    }
}

/// Noisy data and the realized noise norm `||b - b_exact||`.
pub fn add_noise(b_exact: &[f64], spec: &NoiseSpec) -> Result<(Vec<f64>, f64)> {
    if !(spec.delta_rel >= 0.0 && spec.delta_rel.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "relative noise level must be finite and >= 0, got {}",
            spec.delta_rel
        )));
    }
    if spec.delta_rel == 0.0 {
        return Ok((b_exact.to_vec(), 0.0));
    }
    let scale = spec.delta_rel * b_exact.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    let e: Vec<f64> = (0..b_exact.len())
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            scale * z
        })
        .collect();
    let b = b_exact.iter().zip(&e).map(|(b, e)| b + e).collect();
    Ok((b, norm2(&e)))
}

/// One benchmark instance.
#[derive(Clone, Debug)]
pub struct InverseProblem {
    pub name: String,
    pub a: DenseMatrix,
    pub x_true: Vec<f64>,
    pub b_exact: Vec<f64>,
    pub b: Vec<f64>,
    pub delta_rel: f64,
    /// Realized `||b - b_exact||`.
    pub noise_norm: f64,
    pub seed: u64,
    /// Set when `x_true` was built from a source condition.
    pub source: Option<SourceInfo>,
}

/// Source element recorded by [`make_sourcewise`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SourceInfo {
    /// `||w||`.
    pub norm: f64,
    /// `x = Gamma A^T w` rather than `x = A^T w`.
    pub weighted: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ProblemNorms {
    pub a_frobenius: f64,
    pub x_true: f64,
    pub b_exact: f64,
    pub b: f64,
    pub noise: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ProblemMeta {
    pub name: String,
    pub n: usize,
    pub delta_rel: f64,
    pub seed: u64,
    pub norms: ProblemNorms,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<SourceInfo>,
}

impl InverseProblem {
    /// Named problem of size `n` with noise drawn per `noise`.
    pub fn generate(name: ProblemName, n: usize, noise: &NoiseSpec) -> Result<Self> {
        let (a, x_true, b_exact) = generate(name, n)?;
        let (b, noise_norm) = add_noise(&b_exact, noise)?;
        Ok(Self {
            name: name.to_string(),
            a,
            x_true,
            b_exact,
            b,
            delta_rel: noise.delta_rel,
            noise_norm,
            seed: noise.seed,
            source: None,
        })
    }

    pub fn n(&self) -> usize {
        self.a.rows()
    }

    pub fn meta(&self) -> ProblemMeta {
        ProblemMeta {
            name: self.name.clone(),
            n: self.a.rows(),
            delta_rel: self.delta_rel,
            seed: self.seed,
            norms: ProblemNorms {
                a_frobenius: self.a.frobenius_norm(),
                x_true: norm2(&self.x_true),
                b_exact: norm2(&self.b_exact),
                b: norm2(&self.b),
                noise: self.noise_norm,
            },
            source: self.source,
        }
    }

    /// Writes `A.mtx`, `x_true.mtx`, `b.mtx` and `meta.json` into `dir`.
    pub fn export(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        mtx::write(dir.join("A.mtx"), &self.a)?;
        mtx::write_vector(dir.join("x_true.mtx"), &self.x_true)?;
        mtx::write_vector(dir.join("b.mtx"), &self.b)?;
        let mut meta = serde_json::to_string_pretty(&self.meta())?;
        meta.push('\n');
        fs::write(dir.join("meta.json"), meta)?;
        Ok(())
    }

    /// Reads a directory written by [`InverseProblem::export`]. The exact data
    /// is recomputed as `A x_true`.
    pub fn import(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let a = mtx::read(dir.join("A.mtx"))?;
        let x_true = mtx::read_vector(dir.join("x_true.mtx"))?;
        let b = mtx::read_vector(dir.join("b.mtx"))?;
        let meta: ProblemMeta = serde_json::from_str(&fs::read_to_string(dir.join("meta.json"))?)?;
        if x_true.len() != a.cols() || b.len() != a.rows() {
            return Err(Error::shape(
                "problem import",
                format!("vectors matching a {}x{} operator", a.rows(), a.cols()),
                format!("x_true {} / b {}", x_true.len(), b.len()),
            ));
        }
        let b_exact = a.matvec(&x_true);
        let noise_norm = dist(&b, &b_exact);
        Ok(Self {
            name: meta.name,
            a,
            x_true,
            b_exact,
            b,
            delta_rel: meta.delta_rel,
            noise_norm,
            seed: meta.seed,
            source: meta.source,
        })
    }
}

/// Problem whose solution satisfies a source condition: a seeded Gaussian `w`
/// gives `x = A^T w`, or `x = Gamma A^T w` when a penalty bundle is supplied.
pub fn make_sourcewise(
    a: &DenseMatrix,
    bundle: Option<&WeightedPinv>,
    seed: u64,
    noise: &NoiseSpec,
) -> Result<InverseProblem> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let w: Vec<f64> = (0..a.rows())
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    make_sourcewise_from(a, bundle, &w, seed, noise)
}

/// As [`make_sourcewise`] with a given source element `w`.
pub fn make_sourcewise_from(
    a: &DenseMatrix,
    bundle: Option<&WeightedPinv>,
    w: &[f64],
    seed: u64,
    noise: &NoiseSpec,
) -> Result<InverseProblem> {
    if w.len() != a.rows() {
        return Err(Error::shape(
            "make_sourcewise",
            format!("source of length {}", a.rows()),
            w.len(),
        ));
    }
    let x_true = match bundle {
        None => a.tr_matvec(w),
        Some(bundle) => bundle.gamma_apply(a, &a.tr_matvec(w))?,
    };
    let b_exact = a.matvec(&x_true);
    let (b, noise_norm) = add_noise(&b_exact, noise)?;
    Ok(InverseProblem {
        name: if bundle.is_some() {
            "sourcewise_penalized"
        } else {
            "sourcewise"
        }
        .to_string(),
        a: a.clone(),
        x_true,
        b_exact,
        b,
        delta_rel: noise.delta_rel,
        noise_norm,
        seed,
        source: Some(SourceInfo {
            norm: norm2(w),
            weighted: bundle.is_some(),
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{singular_values, svd_full};

    #[test]
    fn names_parse() {
        for p in ProblemName::ALL {
            assert_eq!(p.as_str().parse::<ProblemName>().unwrap(), p);
        }
        match "tomo".parse::<ProblemName>() {
            Err(Error::UnknownProblem { valid, .. }) => assert!(valid.contains("shaw")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn size_checks() {
        assert!(generate(ProblemName::Phillips, 10).is_err());
        assert!(generate(ProblemName::Shaw, 9).is_err());
        assert!(generate(ProblemName::Foxgood, 4).is_err());
        assert!(generate(ProblemName::Foxgood, 9).is_ok());
    }

    #[test]
    fn exact_data_consistent() {
        for p in ProblemName::ALL {
            let (a, x, b) = generate(p, 64).unwrap();
            assert!(dist(&a.matvec(&x), &b) <= 1e-10 * norm2(&b), "{p}");
            assert!(a.as_slice().iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn symmetric_kernels() {
        for p in [
            ProblemName::Deriv2,
            ProblemName::Phillips,
            ProblemName::Shaw,
            ProblemName::Foxgood,
            ProblemName::Gravity,
        ] {
            let (a, _, _) = generate(p, 40).unwrap();
            assert!(a.sub(&a.transpose()).max_abs() < 1e-14, "{p}");
        }
    }

    #[test]
    fn deriv2_spectrum_is_algebraic() {
        let (a, _, _) = generate(ProblemName::Deriv2, 100).unwrap();
        let s = singular_values(&a).unwrap();
        // log-log slope over the leading part of the spectrum.
        let pts: Vec<(f64, f64)> = (0..30)
            .map(|i| (((i + 1) as f64).ln(), s[i].ln()))
            .collect();
        let slope = crate::diagnostics::linear_fit(&pts).1;
        assert!((slope + 2.0).abs() <= 0.3, "slope {slope}");
        // Continuous eigenvalues (i pi)^-2.
        assert!((s[0] - 1.0 / (PI * PI)).abs() < 1e-3);
    }

    #[test]
    fn shaw_spectrum_is_exponential() {
        let (a, _, _) = generate(ProblemName::Shaw, 100).unwrap();
        let s = svd_full(&a).unwrap().sigma;
        let pts: Vec<(f64, f64)> = (5..=14).map(|i| (i as f64, s[i - 1].ln())).collect();
        let (_, slope, r2) = crate::diagnostics::linear_fit_r2(&pts);
        assert!(slope < 0.0 && r2 > 0.95, "slope {slope} r2 {r2}");
    }

    #[test]
    fn noise_model() {
        let b = vec![1.0, -3.0, 2.0];
        assert_eq!(
            add_noise(&b, &NoiseSpec::new(0.0, 1)).unwrap(),
            (b.clone(), 0.0)
        );
        let x = add_noise(&b, &NoiseSpec::new(0.1, 7)).unwrap();
        assert_eq!(x, add_noise(&b, &NoiseSpec::new(0.1, 7)).unwrap());
        assert_ne!(x.0, add_noise(&b, &NoiseSpec::new(0.1, 8)).unwrap().0);
        assert!((x.1 - dist(&x.0, &b)).abs() < 1e-15);
        assert!(add_noise(&b, &NoiseSpec::new(-1.0, 7)).is_err());
    }

    #[test]
    fn sourcewise_construction() {
        let q = crate::linalg::qr_thin(&crate::rsvd::gaussian_matrix(5, 5, 3))
            .unwrap()
            .q;
        let p = make_sourcewise_from(
            &q,
            None,
            &[1.0, 0.0, 0.0, 0.0, 0.0],
            0,
            &NoiseSpec::new(0.0, 0),
        )
        .unwrap();
        assert!(dist(&p.x_true, &q.tr_matvec(&[1.0, 0.0, 0.0, 0.0, 0.0])) < 1e-15);
        assert_eq!(p.source.map(|s| s.norm), Some(1.0));
    }
}
