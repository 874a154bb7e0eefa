//! Smooth maps from unconstrained coordinates to constrained mixture
//! parameters.
//!
//! All maps are generic over [`Graph`], so the same code builds tape nodes
//! during fitting and plain floats (via [`Eval`](crate::autodiff::Eval)) when
//! exporting parameters.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::autodiff::linalg::{gram_lower, solve, LowerTri};
use crate::autodiff::{AdError, Graph};
use crate::{Error, Result};

/// `|Vᵢᵢ|` below this marks a covariance factor as near-singular.
pub const NEAR_SINGULAR: f64 = 1e-10;

/// Log-proportions `log πₖ = αₖ − logsumexp(α)`.
pub fn log_weights_from_logits<G: Graph>(g: &mut G, alpha: &[G::Var]) -> Result<Vec<G::Var>> {
    let lse = g.logsumexp(alpha)?;
    Ok(alpha
        .iter()
        .map(|&a| g.sub(a, lse))
        .collect::<Result<_, AdError>>()?)
}

/// Softmax of the logits; entries are positive and sum to one.
pub fn weights_from_logits<G: Graph>(g: &mut G, alpha: &[G::Var]) -> Result<Vec<G::Var>> {
    let logs = log_weights_from_logits(g, alpha)?;
    Ok(logs
        .into_iter()
        .map(|l| g.exp(l))
        .collect::<Result<_, AdError>>()?)
}

#[derive(Debug, Clone)]
pub struct FactorCov<V> {
    /// Dense row-major `V Vᵀ`.
    pub sigma: Vec<V>,
    /// `2 Σ log|Vᵢᵢ|`; `None` when some diagonal entry is exactly zero.
    pub logdet: Option<V>,
    pub near_singular: bool,
}

/// `Σ = V Vᵀ` for a lower-triangular factor, with its log-determinant.
pub fn cov_from_factor<G: Graph>(g: &mut G, v: &LowerTri<G::Var>) -> Result<FactorCov<G::Var>> {
    let sigma = gram_lower(g, v)?;
    let diag: Vec<f64> = (0..v.dim()).map(|i| g.value(v.diag(i))).collect();
    let near_singular = diag.iter().any(|d| d.abs() < NEAR_SINGULAR);
    let logdet = if diag.iter().any(|&d| d == 0.0) {
        None
    } else {
        let mut terms = Vec::with_capacity(v.dim());
        for i in 0..v.dim() {
            let a = g.abs(v.diag(i))?;
            terms.push(g.ln(a)?);
        }
        let s = g.sum(&terms)?;
        Some(g.scale(s, 2.0)?)
    };
    Ok(FactorCov {
        sigma,
        logdet,
        near_singular,
    })
}

/// `O = (I + Z)⁻¹ (I − Z)` with `Z = (A − Aᵀ)/2`, for row-major `A` (`p × p`).
pub fn cayley_orthogonal<G: Graph>(g: &mut G, a: &[G::Var], p: usize) -> Result<Vec<G::Var>> {
    if a.len() != p * p {
        return Err(Error::DimensionMismatch {
            expected: p * p,
            got: a.len(),
        });
    }
    let one = g.constant(1.0);
    let mut plus = Vec::with_capacity(p * p);
    let mut minus = Vec::with_capacity(p * p);
    for i in 0..p {
        for j in 0..p {
            if i == j {
                plus.push(one);
                minus.push(one);
            } else {
                let d = g.sub(a[i * p + j], a[j * p + i])?;
                let z = g.scale(d, 0.5)?;
                plus.push(z);
                minus.push(g.neg(z)?);
            }
        }
    }
    Ok(solve(g, &plus, &minus, p, p)?)
}

/// Cayley map of the skew matrix whose strict upper triangle (row-major) is
/// `upper` and whose lower triangle is zero.
pub fn cayley_from_upper<G: Graph>(g: &mut G, upper: &[G::Var], p: usize) -> Result<Vec<G::Var>> {
    if upper.len() != p * p.saturating_sub(1) / 2 {
        return Err(Error::DimensionMismatch {
            expected: p * p.saturating_sub(1) / 2,
            got: upper.len(),
        });
    }
    let zero = g.constant(0.0);
    let mut a = vec![zero; p * p];
    let mut it = upper.iter();
    for i in 0..p {
        for j in i + 1..p {
            a[i * p + j] = *it.next().expect("length checked");
        }
    }
    cayley_orthogonal(g, &a, p)
}

/// `ν = e^{ν'}`.
pub fn dof_from_log<G: Graph>(g: &mut G, log_dof: G::Var) -> Result<G::Var> {
    Ok(g.exp(log_dof)?)
}

/// Equal / Variable / Identity letter of a covariance constraint code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Letter {
    E,
    V,
    I,
}

/// Supported eigen-decomposition constraints `Σₖ = λₖ Dₖ Aₖ Dₖᵀ`
/// (volume, shape, orientation).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MclustConstraint {
    EII,
    VII,
    EEI,
    VVI,
    EEE,
    VVV,
}

impl MclustConstraint {
    pub const ALL: [MclustConstraint; 6] = [
        MclustConstraint::EII,
        MclustConstraint::VII,
        MclustConstraint::EEI,
        MclustConstraint::VVI,
        MclustConstraint::EEE,
        MclustConstraint::VVV,
    ];

    pub fn letters(&self) -> [Letter; 3] {
        use Letter::*;
        match self {
            MclustConstraint::EII => [E, I, I],
            MclustConstraint::VII => [V, I, I],
            MclustConstraint::EEI => [E, E, I],
            MclustConstraint::VVI => [V, V, I],
            MclustConstraint::EEE => [E, E, E],
            MclustConstraint::VVV => [V, V, V],
        }
    }

    fn blocks(letter: Letter, k: usize) -> usize {
        match letter {
            Letter::E => 1,
            Letter::V => k,
            Letter::I => 0,
        }
    }

    pub fn volume_len(&self, k: usize) -> usize {
        Self::blocks(self.letters()[0], k)
    }

    /// `p − 1` free log-shape entries per block (the last is fixed by the
    /// unit geometric mean).
    pub fn shape_len(&self, k: usize, p: usize) -> usize {
        Self::blocks(self.letters()[1], k) * (p - 1)
    }

    /// `p(p − 1)/2` skew entries per orientation block.
    pub fn orientation_len(&self, k: usize, p: usize) -> usize {
        Self::blocks(self.letters()[2], k) * (p * (p - 1) / 2)
    }

    pub fn cov_param_count(&self, k: usize, p: usize) -> usize {
        self.volume_len(k) + self.shape_len(k, p) + self.orientation_len(k, p)
    }
}

impl fmt::Display for MclustConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromStr for MclustConstraint {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MclustConstraint::ALL
            .into_iter()
            .find(|c| c.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown mclust constraint {s:?} (expected one of EII, VII, EEI, VVI, EEE, VVV)"
                ))
            })
    }
}

/// One component's pieces of `λ D diag(a) Dᵀ`.
#[derive(Debug, Clone)]
pub struct MclustComponent<V> {
    pub log_volume: V,
    /// `log aⱼ`, summing to zero.
    pub log_shape: Vec<V>,
    /// Row-major orthogonal `D`; `None` for axis-aligned constraints.
    pub orientation: Option<Vec<V>>,
}

/// Unpacks the volume / shape / orientation blocks of all `k` components.
pub fn mclust_components<G: Graph>(
    g: &mut G,
    constraint: MclustConstraint,
    log_volume: &[G::Var],
    shape: &[G::Var],
    orient: &[G::Var],
    k: usize,
    p: usize,
) -> Result<Vec<MclustComponent<G::Var>>> {
    let expect = |got: usize, expected: usize| {
        if got == expected {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected, got })
        }
    };
    expect(log_volume.len(), constraint.volume_len(k))?;
    expect(shape.len(), constraint.shape_len(k, p))?;
    expect(orient.len(), constraint.orientation_len(k, p))?;

    let [vol, shp, ori] = constraint.letters();
    let pick = |letter: Letter, comp: usize| if letter == Letter::V { comp } else { 0 };

    let mut shapes = Vec::new();
    let shape_blocks = MclustConstraint::blocks(shp, k);
    for b in 0..shape_blocks {
        let free = &shape[b * (p - 1)..(b + 1) * (p - 1)];
        let total = g.sum(free)?;
        let mut logs = free.to_vec();
        logs.push(g.neg(total)?);
        shapes.push(logs);
    }
    let mut rotations = Vec::new();
    let skew = p * (p - 1) / 2;
    for b in 0..MclustConstraint::blocks(ori, k) {
        rotations.push(cayley_from_upper(g, &orient[b * skew..(b + 1) * skew], p)?);
    }
    let zero = g.constant(0.0);

    Ok((0..k)
        .map(|c| MclustComponent {
            log_volume: log_volume[pick(vol, c)],
            log_shape: if shape_blocks == 0 {
                vec![zero; p]
            } else {
                shapes[pick(shp, c)].clone()
            },
            orientation: rotations.get(pick(ori, c)).cloned(),
        })
        .collect())
}

/// Dense `Σₖ = λₖ Dₖ diag(aₖ) Dₖᵀ` for every component.
pub fn mclust_cov<G: Graph>(
    g: &mut G,
    constraint: MclustConstraint,
    log_volume: &[G::Var],
    shape: &[G::Var],
    orient: &[G::Var],
    k: usize,
    p: usize,
) -> Result<Vec<Vec<G::Var>>> {
    let comps = mclust_components(g, constraint, log_volume, shape, orient, k, p)?;
    comps
        .iter()
        .map(|c| mclust_component_cov(g, c, p))
        .collect()
}

pub fn mclust_component_cov<G: Graph>(
    g: &mut G,
    c: &MclustComponent<G::Var>,
    p: usize,
) -> Result<Vec<G::Var>> {
    let scales = c
        .log_shape
        .iter()
        .map(|&s| {
            let l = g.add(c.log_volume, s)?;
            g.exp(l)
        })
        .collect::<Result<Vec<_>, AdError>>()?;
    let zero = g.constant(0.0);
    let mut sigma = vec![zero; p * p];
    match &c.orientation {
        None => {
            for i in 0..p {
                sigma[i * p + i] = scales[i];
            }
        }
        Some(d) => {
            for i in 0..p {
                for j in 0..=i {
                    let mut terms = Vec::with_capacity(p);
                    for m in 0..p {
                        let t = g.mul(d[i * p + m], d[j * p + m])?;
                        terms.push(g.mul(t, scales[m])?);
                    }
                    let s = g.sum(&terms)?;
                    sigma[i * p + j] = s;
                    sigma[j * p + i] = s;
                }
            }
        }
    }
    Ok(sigma)
}

/// Common (`C`) or unconstrained (`U`) across components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Tie {
    C,
    U,
}

/// One of the eight `Σₖ = Λₖ Λₖᵀ + Ωₖ` tying patterns: loadings tied,
/// noise tied, noise isotropic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct PgmmFamily {
    pub loading: Tie,
    pub noise: Tie,
    /// `C` means `Ωₖ = ωₖ I`, `U` means a full diagonal.
    pub noise_shape: Tie,
}

impl PgmmFamily {
    pub fn all() -> Vec<PgmmFamily> {
        let ties = [Tie::C, Tie::U];
        let mut out = Vec::with_capacity(8);
        for loading in ties {
            for noise in ties {
                for noise_shape in ties {
                    out.push(PgmmFamily {
                        loading,
                        noise,
                        noise_shape,
                    });
                }
            }
        }
        out
    }

    pub fn loading_blocks(&self, k: usize) -> usize {
        if self.loading == Tie::C {
            1
        } else {
            k
        }
    }

    pub fn loading_len(&self, k: usize, p: usize, q: usize) -> usize {
        self.loading_blocks(k) * trapezoid_len(p, q)
    }

    pub fn noise_len(&self, k: usize, p: usize) -> usize {
        let blocks = if self.noise == Tie::C { 1 } else { k };
        let per = if self.noise_shape == Tie::C { 1 } else { p };
        blocks * per
    }

    pub fn cov_param_count(&self, k: usize, p: usize, q: usize) -> usize {
        self.loading_len(k, p, q) + self.noise_len(k, p)
    }
}

impl fmt::Display for PgmmFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:?}{:?}{:?}",
            self.loading, self.noise, self.noise_shape
        )
    }
}

impl FromStr for PgmmFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let letters: Vec<Tie> = s
            .chars()
            .map(|c| match c.to_ascii_uppercase() {
                'C' => Some(Tie::C),
                'U' => Some(Tie::U),
                _ => None,
            })
            .collect::<Option<_>>()
            .filter(|v: &Vec<Tie>| v.len() == 3)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown PGMM family {s:?} (expected three of C/U, e.g. CCU)"
                ))
            })?;
        Ok(PgmmFamily {
            loading: letters[0],
            noise: letters[1],
            noise_shape: letters[2],
        })
    }
}

impl TryFrom<String> for PgmmFamily {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<PgmmFamily> for String {
    fn from(f: PgmmFamily) -> String {
        f.to_string()
    }
}

/// Free entries of a `p × q` loading with zeros above the diagonal:
/// `pq − q(q − 1)/2`.
pub const fn trapezoid_len(p: usize, q: usize) -> usize {
    p * q - q * (q.saturating_sub(1)) / 2
}

#[derive(Debug, Clone)]
pub struct PgmmComponent<V> {
    /// Row-major `p × q`; `None` marks a structural zero.
    pub loading: Vec<Option<V>>,
    /// Diagonal of `Ωₖ`.
    pub noise: Vec<V>,
}

pub fn pgmm_components<G: Graph>(
    g: &mut G,
    family: PgmmFamily,
    loadings: &[G::Var],
    log_noise: &[G::Var],
    k: usize,
    p: usize,
    q: usize,
) -> Result<Vec<PgmmComponent<G::Var>>> {
    if q == 0 || q >= p {
        return Err(Error::Config(format!(
            "latent dimension q must satisfy 1 <= q < p (got q={q}, p={p})"
        )));
    }
    if loadings.len() != family.loading_len(k, p, q) {
        return Err(Error::DimensionMismatch {
            expected: family.loading_len(k, p, q),
            got: loadings.len(),
        });
    }
    if log_noise.len() != family.noise_len(k, p) {
        return Err(Error::DimensionMismatch {
            expected: family.noise_len(k, p),
            got: log_noise.len(),
        });
    }
    let per = trapezoid_len(p, q);
    let loading_blocks: Vec<Vec<Option<G::Var>>> = (0..family.loading_blocks(k))
        .map(|b| {
            let mut it = loadings[b * per..(b + 1) * per].iter();
            let mut full = Vec::with_capacity(p * q);
            for i in 0..p {
                for j in 0..q {
                    full.push(if j <= i { it.next().copied() } else { None });
                }
            }
            full
        })
        .collect();

    let noise_vals = log_noise
        .iter()
        .map(|&w| g.exp(w))
        .collect::<Result<Vec<_>, AdError>>()?;
    let noise_per = if family.noise_shape == Tie::C { 1 } else { p };
    let noise_for = |c: usize| -> Vec<G::Var> {
        let block = if family.noise == Tie::C { 0 } else { c };
        let vals = &noise_vals[block * noise_per..(block + 1) * noise_per];
        if family.noise_shape == Tie::C {
            vec![vals[0]; p]
        } else {
            vals.to_vec()
        }
    };

    Ok((0..k)
        .map(|c| PgmmComponent {
            loading: loading_blocks[if family.loading == Tie::C { 0 } else { c }].clone(),
            noise: noise_for(c),
        })
        .collect())
}

pub fn pgmm_component_cov<G: Graph>(
    g: &mut G,
    c: &PgmmComponent<G::Var>,
    p: usize,
    q: usize,
) -> Result<Vec<G::Var>> {
    let zero = g.constant(0.0);
    let mut sigma = vec![zero; p * p];
    for i in 0..p {
        for j in 0..=i {
            let mut terms = Vec::with_capacity(q + 1);
            for m in 0..q {
                if let (Some(a), Some(b)) = (c.loading[i * q + m], c.loading[j * q + m]) {
                    terms.push(g.mul(a, b)?);
                }
            }
            if i == j {
                terms.push(c.noise[i]);
            }
            let s = g.sum(&terms)?;
            sigma[i * p + j] = s;
            sigma[j * p + i] = s;
        }
    }
    Ok(sigma)
}

/// Dense `Σₖ = Λₖ Λₖᵀ + Ωₖ` for every component.
pub fn pgmm_cov<G: Graph>(
    g: &mut G,
    family: PgmmFamily,
    loadings: &[G::Var],
    log_noise: &[G::Var],
    k: usize,
    p: usize,
    q: usize,
) -> Result<Vec<Vec<G::Var>>> {
    let comps = pgmm_components(g, family, loadings, log_noise, k, p, q)?;
    comps
        .iter()
        .map(|c| pgmm_component_cov(g, c, p, q))
        .collect()
}
