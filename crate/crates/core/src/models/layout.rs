use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::spec::{Family, ModelSpec};
use crate::reparam::{trapezoid_len, Tie};
use crate::{Error, Result};

/// The kinds of slices a flat parameter vector is cut into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentKind {
    /// Weight logits `α`.
    Alpha,
    Mean,
    /// Packed lower-triangular covariance factor `V`.
    Factor,
    LogVolume,
    /// Free log-shape entries (all but the last of each block).
    Shape,
    /// Strict upper triangle of the Cayley parameter.
    Orientation,
    /// Lower-trapezoidal loading matrix `Λ`.
    Loading,
    LogNoise,
    LogDof,
}

impl SegmentKind {
    pub fn name(&self) -> &'static str {
        match self {
            SegmentKind::Alpha => "alpha",
            SegmentKind::Mean => "mu",
            SegmentKind::Factor => "V",
            SegmentKind::LogVolume => "log_volume",
            SegmentKind::Shape => "log_shape",
            SegmentKind::Orientation => "orientation",
            SegmentKind::Loading => "Lambda",
            SegmentKind::LogNoise => "log_omega",
            SegmentKind::LogDof => "log_nu",
        }
    }
}

/// `blocks` consecutive chunks of `block_len` coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Segment {
    pub kind: SegmentKind,
    pub offset: usize,
    pub blocks: usize,
    pub block_len: usize,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.blocks * self.block_len
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> Range<usize> {
        self.offset..self.offset + self.len()
    }

    pub fn block(&self, b: usize) -> Range<usize> {
        let s = self.offset + b * self.block_len;
        s..s + self.block_len
    }
}

/// Positions of every named slice inside the flat vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub segments: Vec<Segment>,
    pub len: usize,
}

impl Layout {
    pub fn new(spec: &ModelSpec) -> Layout {
        let (k, p, q) = (spec.k, spec.p, spec.latent());
        let mut parts: Vec<(SegmentKind, usize, usize)> =
            vec![(SegmentKind::Alpha, k, 1), (SegmentKind::Mean, k, p)];
        match spec.family {
            Family::Gmm | Family::Tmm => parts.push((SegmentKind::Factor, k, p * (p + 1) / 2)),
            Family::Mclust(c) => {
                let blocks = |n: usize, per: usize| if per == 0 { 0 } else { n / per };
                let (v, s, o) = (c.volume_len(k), c.shape_len(k, p), c.orientation_len(k, p));
                parts.push((SegmentKind::LogVolume, v, 1));
                parts.push((SegmentKind::Shape, blocks(s, p - 1), p - 1));
                let skew = p * (p - 1) / 2;
                parts.push((SegmentKind::Orientation, blocks(o, skew), skew));
            }
            Family::Pgmm(_) | Family::Mfa => {
                let f = spec.pgmm_family().expect("factor family");
                parts.push((
                    SegmentKind::Loading,
                    f.loading_blocks(k),
                    trapezoid_len(p, q),
                ));
                let nb = if f.noise == Tie::C { 1 } else { k };
                let per = if f.noise_shape == Tie::C { 1 } else { p };
                parts.push((SegmentKind::LogNoise, nb, per));
            }
        }
        if spec.family == Family::Tmm {
            parts.push((SegmentKind::LogDof, k, 1));
        }
        let mut offset = 0;
        let mut segments = Vec::with_capacity(parts.len());
        for (kind, blocks, block_len) in parts {
            if blocks * block_len == 0 {
                continue;
            }
            segments.push(Segment {
                kind,
                offset,
                blocks,
                block_len,
            });
            offset += blocks * block_len;
        }
        Layout {
            segments,
            len: offset,
        }
    }

    pub fn segment(&self, kind: SegmentKind) -> Option<&Segment> {
        self.segments.iter().find(|s| s.kind == kind)
    }
}

/// Unconstrained parameters of a model: a flat vector plus its spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSet {
    pub spec: ModelSpec,
    pub theta: Vec<f64>,
}

impl ParamSet {
    pub fn new(spec: ModelSpec, theta: Vec<f64>) -> Result<ParamSet> {
        spec.validate()?;
        let len = Layout::new(&spec).len;
        if theta.len() != len {
            return Err(Error::DimensionMismatch {
                expected: len,
                got: theta.len(),
            });
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("parameters must be finite".into()));
        }
        Ok(ParamSet { spec, theta })
    }

    pub fn layout(&self) -> Layout {
        Layout::new(&self.spec)
    }

    pub fn slice(&self, kind: SegmentKind) -> &[f64] {
        match self.layout().segment(kind) {
            Some(s) => &self.theta[s.range()],
            None => &[],
        }
    }

    pub fn slice_mut(&mut self, kind: SegmentKind) -> &mut [f64] {
        match self.layout().segment(kind) {
            Some(s) => &mut self.theta[s.range()],
            None => &mut [],
        }
    }

    /// Every block as `(name, values)`, e.g. `("mu[1]", …)`. Segments with a
    /// single block drop the index.
    pub fn named(&self) -> Vec<(String, Vec<f64>)> {
        let mut out = Vec::new();
        for s in self.layout().segments {
            for b in 0..s.blocks {
                let name = if s.blocks == 1 {
                    s.kind.name().to_string()
                } else {
                    format!("{}[{b}]", s.kind.name())
                };
                out.push((name, self.theta[s.block(b)].to_vec()));
            }
        }
        out
    }

    /// Inverse of [`ParamSet::named`].
    pub fn from_named(spec: ModelSpec, named: &[(String, Vec<f64>)]) -> Result<ParamSet> {
        let template = ParamSet {
            spec,
            theta: vec![0.0; Layout::new(&spec).len],
        };
        let expected = template.named();
        if named.len() != expected.len() {
            return Err(Error::DimensionMismatch {
                expected: expected.len(),
                got: named.len(),
            });
        }
        let mut theta = Vec::with_capacity(template.theta.len());
        for ((name, values), (want, zeros)) in named.iter().zip(&expected) {
            if name != want || values.len() != zeros.len() {
                return Err(Error::InvalidInput(format!(
                    "expected block {want} of length {}, got {name} of length {}",
                    zeros.len(),
                    values.len()
                )));
            }
            theta.extend_from_slice(values);
        }
        ParamSet::new(spec, theta)
    }

    /// Relabels components: block `perm[c]` of every per-component segment
    /// moves to position `c`. Tied segments are shared and stay put.
    pub fn permuted(&self, perm: &[usize]) -> Result<ParamSet> {
        let k = self.spec.k;
        let mut seen = vec![false; k];
        if perm.len() != k
            || perm
                .iter()
                .any(|&c| c >= k || std::mem::replace(&mut seen[c], true))
        {
            return Err(Error::InvalidInput(format!(
                "{perm:?} is not a permutation of 0..{k}"
            )));
        }
        let mut theta = self.theta.clone();
        for s in self.layout().segments {
            if s.blocks != k {
                continue;
            }
            for (c, &from) in perm.iter().enumerate() {
                theta[s.block(c)].copy_from_slice(&self.theta[s.block(from)]);
            }
        }
        ParamSet::new(self.spec, theta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reparam::{MclustConstraint, PgmmFamily};

    fn all_specs() -> Vec<ModelSpec> {
        let mut specs = Vec::new();
        for k in 1..4 {
            for p in 2..5 {
                specs.push(ModelSpec::new(Family::Gmm, k, p, None).unwrap());
                specs.push(ModelSpec::new(Family::Tmm, k, p, None).unwrap());
                specs.push(ModelSpec::new(Family::Mfa, k, p, Some(1)).unwrap());
                for c in MclustConstraint::ALL {
                    specs.push(ModelSpec::new(Family::Mclust(c), k, p, None).unwrap());
                }
                for f in PgmmFamily::all() {
                    specs.push(ModelSpec::new(Family::Pgmm(f), k, p, Some(p - 1)).unwrap());
                }
            }
        }
        specs
    }

    #[test]
    fn flat_length_is_count_plus_gauge() {
        for spec in all_specs() {
            assert_eq!(Layout::new(&spec).len, spec.param_count() + 1, "{spec}");
        }
    }

    #[test]
    fn named_round_trip() {
        for spec in all_specs() {
            let n = Layout::new(&spec).len;
            let theta: Vec<f64> = (0..n).map(|i| i as f64 * 0.25 - 1.0).collect();
            let ps = ParamSet::new(spec, theta).unwrap();
            let back = ParamSet::from_named(spec, &ps.named()).unwrap();
            assert_eq!(ps, back);
        }
    }

    #[test]
    fn permutation_moves_blocks() {
        let spec = ModelSpec::gmm(3, 2).unwrap();
        let n = Layout::new(&spec).len;
        let ps = ParamSet::new(spec, (0..n).map(|i| i as f64).collect()).unwrap();
        let q = ps.permuted(&[2, 0, 1]).unwrap();
        assert_eq!(q.slice(SegmentKind::Alpha), &[2.0, 0.0, 1.0]);
        assert_eq!(
            &q.slice(SegmentKind::Mean)[..2],
            &ps.slice(SegmentKind::Mean)[4..]
        );
        assert_eq!(q.permuted(&[1, 2, 0]).unwrap(), ps);
        assert!(ps.permuted(&[0, 0, 1]).is_err());
    }
}
