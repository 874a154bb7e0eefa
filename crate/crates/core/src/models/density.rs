//! Component log-densities assembled on a [`Graph`].

use std::f64::consts::PI;

use super::layout::{Layout, SegmentKind};
use super::spec::{Family, ModelSpec};
use crate::autodiff::linalg::{cholesky, gram_lower, LowerTri};
use crate::autodiff::{AdError, Eval, Graph};
use crate::data::Dataset;
use crate::mixture::MixtureParams;
use crate::reparam::{
    dof_from_log, log_weights_from_logits, mclust_components, pgmm_component_cov, pgmm_components,
};
use crate::{Error, Result};

/// Added to `|Vᵢᵢ|` inside the density so a component cannot collapse onto a
/// single point.
pub const DIAG_FLOOR: f64 = 1e-6;

enum Shape<V> {
    /// `Σ = L Lᵀ`.
    Factor(LowerTri<V>),
    /// `Σ = D diag(1/wⱼ) Dᵀ`; `D = I` when absent.
    Rotated {
        d: Option<Vec<V>>,
        inv_scale: Vec<V>,
    },
}

pub(crate) struct Component<V> {
    mean: Vec<V>,
    shape: Shape<V>,
    /// Everything in `log πₖ + log fₖ(x)` that does not depend on `x`.
    constant: V,
    /// `(ν, (ν + p)/2)` for Student's t components.
    dof: Option<(V, V)>,
}

fn tag(c: usize) -> impl Fn(AdError) -> Error {
    move |source| Error::Component {
        component: c,
        source,
    }
}

fn tag_err(c: usize) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::Ad(source) => Error::Component {
            component: c,
            source,
        },
        other => other,
    }
}

/// Lower-triangular factor with the diagonal floor applied.
fn guarded_factor<G: Graph>(g: &mut G, packed: &[G::Var], p: usize) -> Result<LowerTri<G::Var>> {
    let v = LowerTri::from_packed(p, packed.to_vec())?;
    let mut err = None;
    let l = v.map(|i, j, x| {
        if i != j {
            return x;
        }
        let raw = g.value(x).abs();
        if raw < 1e2 * DIAG_FLOOR {
            log::debug!("diagonal floor active: |V[{i}][{i}]| = {raw:e}");
        }
        match g.abs(x).and_then(|a| g.offset(a, DIAG_FLOOR)) {
            Ok(y) => y,
            Err(e) => {
                err.get_or_insert(e);
                x
            }
        }
    });
    match err {
        Some(e) => Err(e.into()),
        None => Ok(l),
    }
}

fn factor_logdet<G: Graph>(g: &mut G, l: &LowerTri<G::Var>) -> Result<G::Var, AdError> {
    let mut logs = Vec::with_capacity(l.dim());
    for i in 0..l.dim() {
        logs.push(g.ln(l.diag(i))?);
    }
    let s = g.sum(&logs)?;
    g.scale(s, 2.0)
}

/// Turns `θ` into per-component pieces ready for point evaluation.
pub(crate) fn build<G: Graph>(
    g: &mut G,
    spec: &ModelSpec,
    theta: &[G::Var],
) -> Result<Vec<Component<G::Var>>> {
    let layout = Layout::new(spec);
    if theta.len() != layout.len {
        return Err(Error::DimensionMismatch {
            expected: layout.len,
            got: theta.len(),
        });
    }
    let (k, p, q) = (spec.k, spec.p, spec.latent());
    let seg = |kind: SegmentKind| match layout.segment(kind) {
        Some(s) => &theta[s.range()],
        None => &theta[..0],
    };
    let log_w = log_weights_from_logits(g, seg(SegmentKind::Alpha))?;
    let means = seg(SegmentKind::Mean);

    let mut shapes: Vec<(Shape<G::Var>, G::Var)> = Vec::with_capacity(k);
    match spec.family {
        Family::Gmm | Family::Tmm => {
            let per = p * (p + 1) / 2;
            let packed = seg(SegmentKind::Factor);
            for c in 0..k {
                let l =
                    guarded_factor(g, &packed[c * per..(c + 1) * per], p).map_err(tag_err(c))?;
                let logdet = factor_logdet(g, &l).map_err(tag(c))?;
                shapes.push((Shape::Factor(l), logdet));
            }
        }
        Family::Mclust(constraint) => {
            let comps = mclust_components(
                g,
                constraint,
                seg(SegmentKind::LogVolume),
                seg(SegmentKind::Shape),
                seg(SegmentKind::Orientation),
                k,
                p,
            )?;
            for (c, comp) in comps.into_iter().enumerate() {
                let mut inv_scale = Vec::with_capacity(p);
                for &s in &comp.log_shape {
                    let t = g.add(comp.log_volume, s).map_err(tag(c))?;
                    let t = g.neg(t).map_err(tag(c))?;
                    inv_scale.push(g.exp(t).map_err(tag(c))?);
                }
                let vol = g.scale(comp.log_volume, p as f64).map_err(tag(c))?;
                let shp = g.sum(&comp.log_shape).map_err(tag(c))?;
                let logdet = g.add(vol, shp).map_err(tag(c))?;
                shapes.push((
                    Shape::Rotated {
                        d: comp.orientation,
                        inv_scale,
                    },
                    logdet,
                ));
            }
        }
        Family::Pgmm(_) | Family::Mfa => {
            let fam = spec.pgmm_family().expect("factor family");
            let comps = pgmm_components(
                g,
                fam,
                seg(SegmentKind::Loading),
                seg(SegmentKind::LogNoise),
                k,
                p,
                q,
            )?;
            for (c, comp) in comps.iter().enumerate() {
                let sigma = pgmm_component_cov(g, comp, p, q).map_err(tag_err(c))?;
                let l = cholesky(g, &sigma, p).map_err(tag(c))?;
                let logdet = factor_logdet(g, &l).map_err(tag(c))?;
                shapes.push((Shape::Factor(l), logdet));
            }
        }
    }

    let log_dofs = seg(SegmentKind::LogDof);
    let pf = p as f64;
    let mut out = Vec::with_capacity(k);
    for (c, (shape, logdet)) in shapes.into_iter().enumerate() {
        let t = tag(c);
        let half_logdet = g.scale(logdet, -0.5).map_err(&t)?;
        let base = g.add(log_w[c], half_logdet).map_err(&t)?;
        let (constant, dof) = if spec.family == Family::Tmm {
            let nu = dof_from_log(g, log_dofs[c]).map_err(tag_err(c))?;
            let nu_p = g.offset(nu, pf).map_err(&t)?;
            let h = g.scale(nu_p, 0.5).map_err(&t)?;
            let lg1 = g.lgamma(h).map_err(&t)?;
            let half_nu = g.scale(nu, 0.5).map_err(&t)?;
            let lg2 = g.lgamma(half_nu).map_err(&t)?;
            let ln_nu = g.ln(nu).map_err(&t)?;
            let norm = g.scale(ln_nu, -0.5 * pf).map_err(&t)?;
            let norm = g.offset(norm, -0.5 * pf * PI.ln()).map_err(&t)?;
            let a = g.sub(lg1, lg2).map_err(&t)?;
            let a = g.add(a, norm).map_err(&t)?;
            (g.add(base, a).map_err(&t)?, Some((nu, h)))
        } else {
            (
                g.offset(base, -0.5 * pf * (2.0 * PI).ln()).map_err(&t)?,
                None,
            )
        };
        out.push(Component {
            mean: means[c * p..(c + 1) * p].to_vec(),
            shape,
            constant,
            dof,
        });
    }
    Ok(out)
}

impl<V: Copy> Component<V> {
    /// `log πₖ + log fₖ(x)`.
    fn weighted_log_density<G: Graph<Var = V>>(&self, g: &mut G, x: &[f64]) -> Result<V, AdError> {
        let mut diff = Vec::with_capacity(x.len());
        for (&m, &xi) in self.mean.iter().zip(x) {
            diff.push(g.offset(m, -xi)?);
        }
        let delta = match &self.shape {
            Shape::Factor(l) => {
                let z = crate::autodiff::linalg::solve_lower(g, l, &diff)?;
                g.dot(&z, &z)?
            }
            Shape::Rotated { d, inv_scale } => {
                let p = diff.len();
                let mut terms = Vec::with_capacity(p);
                for m in 0..p {
                    let y = match d {
                        None => diff[m],
                        Some(d) => {
                            let col: Vec<V> = (0..p).map(|j| d[j * p + m]).collect();
                            g.dot(&col, &diff)?
                        }
                    };
                    let y2 = g.square(y)?;
                    terms.push(g.mul(y2, inv_scale[m])?);
                }
                g.sum(&terms)?
            }
        };
        let tail = match self.dof {
            None => g.scale(delta, -0.5)?,
            Some((nu, h)) => {
                let r = g.div(delta, nu)?;
                let l = g.ln_1p(r)?;
                let t = g.mul(h, l)?;
                g.neg(t)?
            }
        };
        g.add(self.constant, tail)
    }
}

/// `log πₖ + log fₖ(xᵢ)` for all points, row-major `n × k`.
pub fn weighted_log_densities<G: Graph>(
    g: &mut G,
    spec: &ModelSpec,
    theta: &[G::Var],
    data: &Dataset,
) -> Result<Vec<G::Var>> {
    check_data(spec, data)?;
    let comps = build(g, spec, theta)?;
    let mut out = Vec::with_capacity(data.n() * spec.k);
    for x in data.rows() {
        for (c, comp) in comps.iter().enumerate() {
            out.push(comp.weighted_log_density(g, x).map_err(tag(c))?);
        }
    }
    Ok(out)
}

/// Mean log-likelihood `(1/n) Σᵢ log Σₖ πₖ fₖ(xᵢ)`.
pub fn mean_loglik<G: Graph>(
    g: &mut G,
    spec: &ModelSpec,
    theta: &[G::Var],
    data: &Dataset,
) -> Result<G::Var> {
    check_data(spec, data)?;
    let comps = build(g, spec, theta)?;
    let mut per_point = Vec::with_capacity(data.n());
    let mut terms = Vec::with_capacity(spec.k);
    for x in data.rows() {
        terms.clear();
        for (c, comp) in comps.iter().enumerate() {
            terms.push(comp.weighted_log_density(g, x).map_err(tag(c))?);
        }
        per_point.push(g.logsumexp(&terms)?);
    }
    let total = g.sum(&per_point)?;
    Ok(g.scale(total, 1.0 / data.n() as f64)?)
}

fn check_data(spec: &ModelSpec, data: &Dataset) -> Result<()> {
    if data.p() != spec.p {
        return Err(Error::DimensionMismatch {
            expected: spec.p,
            got: data.p(),
        });
    }
    Ok(())
}

/// Constrained-space parameters implied by `θ`, exactly as the density uses
/// them (including the diagonal floor).
pub fn constrained(spec: &ModelSpec, theta: &[f64]) -> Result<MixtureParams> {
    let g = &mut Eval::new();
    let comps = build(g, spec, theta)?;
    let p = spec.p;
    let alpha = Layout::new(spec)
        .segment(SegmentKind::Alpha)
        .map(|s| theta[s.range()].to_vec())
        .expect("alpha always present");
    let weights = crate::reparam::weights_from_logits(g, &alpha)?;
    let mut covs = Vec::with_capacity(spec.k);
    for comp in &comps {
        let sigma = match &comp.shape {
            Shape::Factor(l) => gram_lower(g, l)?,
            Shape::Rotated { d, inv_scale } => {
                let scale: Vec<f64> = inv_scale.iter().map(|w| 1.0 / w).collect();
                let mut s = vec![0.0; p * p];
                for i in 0..p {
                    for j in 0..p {
                        s[i * p + j] = match d {
                            None => {
                                if i == j {
                                    scale[i]
                                } else {
                                    0.0
                                }
                            }
                            Some(d) => (0..p).map(|m| d[i * p + m] * d[j * p + m] * scale[m]).sum(),
                        };
                    }
                }
                s
            }
        };
        covs.push(sigma);
    }
    Ok(MixtureParams {
        weights,
        means: comps.iter().map(|c| c.mean.clone()).collect(),
        covs,
        dofs: (spec.family == Family::Tmm)
            .then(|| comps.iter().map(|c| c.dof.expect("t").0).collect()),
    })
}
