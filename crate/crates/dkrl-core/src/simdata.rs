//! Semi-synthetic data generation: fixed basis designs, ground-truth
//! interaction matrices (exact low-rank, eigendecay, lq-ball), uniform cell
//! sampling with sub-exponential noise, and embedding ingestion from CSV.
//!
//! Every generator is a pure function of its spec and seed.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{self, DenseMatrix};
use crate::seeding::{self, streams};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("ragged row at line {line}: expected {expected} fields, got {got}")]
    Ragged { line: usize, expected: usize, got: usize },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Numerics(#[from] numerics::NumericsError),
}

pub type Result<T> = std::result::Result<T, DataError>;

/// Finite sets of treatment and covariate basis vectors, optionally carrying
/// the ground-truth interaction matrix over basis pairs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FixedBasisDesign {
    /// p x d1; columns are treatment bases.
    pub z_basis: DenseMatrix,
    /// q x d2; columns are covariate bases.
    pub x_basis: DenseMatrix,
    /// Max absolute entry of the attached truth (when present).
    pub entry_bound: f64,
    /// d1 x d2 truth over basis pairs, when attached.
    pub gamma_star: Option<DenseMatrix>,
}

impl FixedBasisDesign {
    pub fn d1(&self) -> usize {
        self.z_basis.cols()
    }

    pub fn d2(&self) -> usize {
        self.x_basis.cols()
    }

    /// Treatment bases as rows (d1 x p), the orientation kernels expect.
    pub fn z_points(&self) -> DenseMatrix {
        self.z_basis.transpose()
    }

    /// Covariate bases as rows (d2 x q).
    pub fn x_points(&self) -> DenseMatrix {
        self.x_basis.transpose()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum ThetaVariant {
    /// Exact rank-r product of Gaussian factors.
    LowRank { rank: usize },
    /// Singular values `i^{-q_exponent}` on random orthonormal factors.
    Decay { q_exponent: f64 },
    /// Decay profile rescaled so the lq sum of singular values hits the
    /// radius exactly.
    LqBall { q: f64, radius: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThetaSpec {
    #[serde(flatten)]
    pub variant: ThetaVariant,
    pub dims: (usize, usize),
    pub scale: f64,
    pub seed: u64,
}

impl ThetaSpec {
    fn validate(&self) -> Result<()> {
        let (p, q) = self.dims;
        if p == 0 || q == 0 {
            return Err(DataError::InvalidSpec("theta dims must be positive".into()));
        }
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(DataError::InvalidSpec("theta scale must be positive".into()));
        }
        match self.variant {
            ThetaVariant::LowRank { rank } => {
                if rank == 0 || rank > p.min(q) {
                    return Err(DataError::InvalidSpec(format!(
                        "rank {} out of range for {}x{}",
                        rank, p, q
                    )));
                }
            }
            ThetaVariant::Decay { q_exponent } => {
                if !(q_exponent.is_finite() && q_exponent >= 0.0) {
                    return Err(DataError::InvalidSpec("decay exponent must be >= 0".into()));
                }
            }
            ThetaVariant::LqBall { q, radius } => {
                if !(0.0..1.0).contains(&q) {
                    return Err(DataError::InvalidSpec(format!("lq exponent {} not in [0,1)", q)));
                }
                if !(radius.is_finite() && radius > 0.0) {
                    return Err(DataError::InvalidSpec("lq radius must be positive".into()));
                }
                if q == 0.0 && radius < 1.0 {
                    return Err(DataError::InvalidSpec(
                        "lq radius below 1 admits only the zero matrix at q = 0".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Sub-exponential additive noise; `sigma` is the standard deviation for
/// both families.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum NoiseSpec {
    Gaussian { sigma: f64 },
    Laplace { sigma: f64 },
}

impl NoiseSpec {
    pub fn sigma(&self) -> f64 {
        match self {
            NoiseSpec::Gaussian { sigma } | NoiseSpec::Laplace { sigma } => *sigma,
        }
    }

    pub fn sample(&self, rng: &mut impl Rng) -> f64 {
        match self {
            NoiseSpec::Gaussian { sigma } => {
                if *sigma == 0.0 {
                    return 0.0;
                }
                let z: f64 = StandardNormal.sample(rng);
                sigma * z
            }
            NoiseSpec::Laplace { sigma } => {
                if *sigma == 0.0 {
                    return 0.0;
                }
                // inverse CDF; scale b = sigma / sqrt(2) gives std sigma
                let b = sigma / 2.0f64.sqrt();
                let u: f64 = rng.gen_range(-0.5..0.5);
                let tail = (1.0 - 2.0 * u.abs()).max(f64::MIN_POSITIVE);
                -b * u.signum() * tail.ln()
            }
        }
    }
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec::Gaussian { sigma: 0.1 }
    }
}

/// Baseline outcome function m(x) applied to a covariate row.
pub type OutcomeFn<'a> = &'a dyn Fn(&[f64]) -> f64;

/// Arm/user index pairs, one per observation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleIndices {
    pub e_z: Vec<usize>,
    pub e_x: Vec<usize>,
}

/// A generated dataset: sampled points, outcomes, provenance indices, and
/// the basis-level truth they were drawn from.
#[derive(Debug, Clone)]
pub struct SampleSet {
    pub z: DenseMatrix,
    pub x: DenseMatrix,
    pub y: Vec<f64>,
    pub indices: SampleIndices,
    pub gamma_star: DenseMatrix,
}

/// Basis design with i.i.d. standard Gaussian columns scaled to unit norm.
pub fn gen_design(p: usize, q: usize, d1: usize, d2: usize, seed: u64) -> Result<FixedBasisDesign> {
    if p == 0 || q == 0 || d1 == 0 || d2 == 0 {
        return Err(DataError::InvalidSpec("design dims must be positive".into()));
    }
    let z_basis = unit_norm_columns(p, d1, &mut seeding::stream_rng(seed, streams::DESIGN_Z));
    let x_basis = unit_norm_columns(q, d2, &mut seeding::stream_rng(seed, streams::DESIGN_X));
    Ok(FixedBasisDesign { z_basis, x_basis, entry_bound: 0.0, gamma_star: None })
}

fn unit_norm_columns(rows: usize, cols: usize, rng: &mut impl Rng) -> DenseMatrix {
    let mut m = DenseMatrix::zeros(rows, cols);
    for j in 0..cols {
        let col: Vec<f64> = (0..rows).map(|_| StandardNormal.sample(rng)).collect();
        let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
        for i in 0..rows {
            m.set(i, j, col[i] / norm);
        }
    }
    m
}

/// Ground-truth interaction matrix plus its singular values.
#[derive(Debug, Clone)]
pub struct GeneratedTheta {
    pub matrix: DenseMatrix,
    pub singulars: Vec<f64>,
}

pub fn gen_theta(spec: &ThetaSpec) -> Result<GeneratedTheta> {
    spec.validate()?;
    let (rows, cols) = spec.dims;
    let k = rows.min(cols);
    let mut rng = seeding::stream_rng(spec.seed, streams::THETA);
    match spec.variant {
        ThetaVariant::LowRank { rank } => {
            let a = DenseMatrix::from_fn(rows, rank, |_, _| StandardNormal.sample(&mut rng));
            let b = DenseMatrix::from_fn(cols, rank, |_, _| StandardNormal.sample(&mut rng));
            let matrix = a.matmul(&b.transpose()).scale(spec.scale);
            let singulars = numerics::svd(&matrix)?.singulars;
            Ok(GeneratedTheta { matrix, singulars })
        }
        ThetaVariant::Decay { q_exponent } => {
            let singulars: Vec<f64> = (1..=k)
                .map(|i| spec.scale * (i as f64).powf(-q_exponent))
                .collect();
            let matrix = orthonormal_sandwich(rows, cols, &singulars, &mut rng);
            Ok(GeneratedTheta { matrix, singulars })
        }
        ThetaVariant::LqBall { q, radius } => {
            // base profile i^{-2}; the lq rescale pins the overall scale, so
            // spec.scale does not enter here
            let mut profile: Vec<f64> = (1..=k).map(|i| (i as f64).powi(-2)).collect();
            if q == 0.0 {
                let keep = (radius.floor() as usize).min(k);
                for s in profile.iter_mut().skip(keep) {
                    *s = 0.0;
                }
            } else {
                let lq_sum: f64 = profile.iter().map(|s| s.powf(q)).sum();
                let c = (radius / lq_sum).powf(1.0 / q);
                for s in profile.iter_mut() {
                    *s *= c;
                }
            }
            let matrix = orthonormal_sandwich(rows, cols, &profile, &mut rng);
            Ok(GeneratedTheta { matrix, singulars: profile })
        }
    }
}

/// `U diag(singulars) V'` with random orthonormal factors (modified
/// Gram-Schmidt on Gaussian columns).
fn orthonormal_sandwich(
    p: usize,
    q: usize,
    singulars: &[f64],
    rng: &mut impl Rng,
) -> DenseMatrix {
    let k = singulars.len();
    let u = random_orthonormal(p, k, rng);
    let v = random_orthonormal(q, k, rng);
    let mut scaled = u;
    for j in 0..k {
        for i in 0..scaled.rows() {
            scaled.set(i, j, scaled.get(i, j) * singulars[j]);
        }
    }
    scaled.matmul(&v.transpose())
}

fn random_orthonormal(rows: usize, cols: usize, rng: &mut impl Rng) -> DenseMatrix {
    assert!(cols <= rows);
    let mut m = DenseMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng));
    for j in 0..cols {
        for prev in 0..j {
            let proj: f64 = (0..rows).map(|i| m.get(i, j) * m.get(i, prev)).sum();
            for i in 0..rows {
                m.set(i, j, m.get(i, j) - proj * m.get(i, prev));
            }
        }
        let norm = (0..rows).map(|i| m.get(i, j).powi(2)).sum::<f64>().sqrt();
        for i in 0..rows {
            m.set(i, j, m.get(i, j) / norm);
        }
    }
    m
}

/// True iff the lq sum of singular values is within the radius
/// (`0^0 = 0` for zero singular values, so q = 0 counts the rank).
pub fn lq_membership(singulars: &[f64], q: f64, radius: f64) -> Result<bool> {
    if !(0.0..1.0).contains(&q) {
        return Err(DataError::InvalidSpec(format!("lq exponent {} not in [0,1)", q)));
    }
    if singulars.iter().any(|s| *s < 0.0) {
        return Err(DataError::InvalidSpec("singular values must be nonnegative".into()));
    }
    let sum: f64 = singulars
        .iter()
        .map(|&s| if s > 0.0 { s.powf(q) } else { 0.0 })
        .sum();
    Ok(sum <= radius + 1e-12)
}

/// Attach `gamma_star = Z' theta X` to a design, rescaling theta so the max
/// absolute entry of the truth equals `target_bound`. Returns the rescaled
/// theta; instantiates the entry bound the consistency analysis assumes.
pub fn attach_truth(
    design: &mut FixedBasisDesign,
    theta: &DenseMatrix,
    target_bound: f64,
) -> Result<DenseMatrix> {
    if !(target_bound.is_finite() && target_bound > 0.0) {
        return Err(DataError::InvalidSpec("entry bound must be positive".into()));
    }
    let gamma = design.z_basis.transpose().matmul(theta).matmul(&design.x_basis);
    let max = gamma.max_abs();
    if max == 0.0 {
        return Err(DataError::InvalidSpec("truth is identically zero".into()));
    }
    let s = target_bound / max;
    design.gamma_star = Some(gamma.scale(s));
    design.entry_bound = target_bound;
    Ok(theta.scale(s))
}

/// Draw `n` observations: uniform arm/user index pairs with replacement,
/// `y_i = m(x_i) + gamma[e_z, e_x] + eps_i`.
pub fn sample_dataset(
    design: &FixedBasisDesign,
    theta: &DenseMatrix,
    n: usize,
    noise: &NoiseSpec,
    m_fn: Option<OutcomeFn>,
    seed: u64,
) -> Result<SampleSet> {
    if n == 0 {
        return Err(DataError::InvalidSpec("sample size must be positive".into()));
    }
    if theta.rows() != design.z_basis.rows() || theta.cols() != design.x_basis.rows() {
        return Err(DataError::InvalidSpec(format!(
            "theta is {}x{} but bases are {}x- and {}x-",
            theta.rows(),
            theta.cols(),
            design.z_basis.rows(),
            design.x_basis.rows()
        )));
    }
    let (d1, d2) = (design.d1(), design.d2());
    let gamma = design.z_basis.transpose().matmul(theta).matmul(&design.x_basis);

    let mut idx_rng = seeding::stream_rng(seed, streams::SAMPLE_INDICES);
    let e_z: Vec<usize> = (0..n).map(|_| idx_rng.gen_range(0..d1)).collect();
    let e_x: Vec<usize> = (0..n).map(|_| idx_rng.gen_range(0..d2)).collect();

    let z_points = design.z_points();
    let x_points = design.x_points();
    let z = z_points.select_rows(&e_z);
    let x = x_points.select_rows(&e_x);

    let mut noise_rng = seeding::stream_rng(seed, streams::NOISE);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let base = m_fn.map_or(0.0, |f| f(x.row(i)));
        y.push(base + gamma.get(e_z[i], e_x[i]) + noise.sample(&mut noise_rng));
    }
    Ok(SampleSet { z, x, y, indices: SampleIndices { e_z, e_x }, gamma_star: gamma })
}

/// Load a numeric CSV (one row per item, no header unless told otherwise).
pub fn load_embeddings(path: &Path, has_header: bool) -> Result<DenseMatrix> {
    let text = fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_embeddings(&text, has_header)
}

fn parse_embeddings(text: &str, has_header: bool) -> Result<DenseMatrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut expected = None;
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if i == 0 && has_header {
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for field in line.split(',') {
            let v: f64 = field.trim().parse().map_err(|_| DataError::Parse {
                line: line_no,
                msg: format!("cannot parse {:?} as a number", field),
            })?;
            if !v.is_finite() {
                return Err(DataError::Parse {
                    line: line_no,
                    msg: "non-finite value".into(),
                });
            }
            row.push(v);
        }
        match expected {
            None => expected = Some(row.len()),
            Some(e) if e != row.len() => {
                return Err(DataError::Ragged { line: line_no, expected: e, got: row.len() })
            }
            _ => {}
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(DataError::EmptyInput("no data rows".into()));
    }
    Ok(DenseMatrix::from_rows(&rows)?)
}

/// Write a matrix as CSV with shortest round-trip float formatting, one row
/// per line. The inverse of `load_embeddings` with no header.
pub fn write_matrix_csv(path: &Path, m: &DenseMatrix) -> Result<()> {
    let mut out = String::new();
    for i in 0..m.rows() {
        let mut first = true;
        for v in m.row(i) {
            if !first {
                out.push(',');
            }
            first = false;
            let _ = write!(out, "{v}");
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })
}
