//! View-wise and refocused-image losses.
//!
//! Every refocus-domain loss is a weighted sum over refocus nodes,
//!
//! ```text
//!   loss = Σ_k weight_k · base_error(R(L̂, r_k), R(L, r_k), p)
//! ```
//!
//! where the nodes and weights come from a [`RefocusQuadrature`]:
//!
//! * RIE: `r_k = s·k` for `k = -D/s..=D/s`, `weight_k = w(k) / 2D`;
//! * UCRIE: trapezoidal nodes on `[-D, D]`, weights `q / 2D` (halved at the ends);
//! * CRIE: trapezoidal nodes on `[-r_max, r_max]` scaled by `g(r) = e^{-r²}` and `1 / 2D`.
//!
//! Refocusing is linear, so `R(L̂) - R(L) = R(L̂ - L)`; the error field is
//! refocused once per node instead of both light fields.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::lightfield::{LightField, View};
use crate::refocus::{AdjointAccumulator, Refocuser, ShiftEngine};

/// Per-pixel error norm: mean absolute (`p = 1`) or mean squared (`p = 2`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Norm {
    L1,
    L2,
}

impl Norm {
    pub fn p(self) -> u8 {
        match self {
            Norm::L1 => 1,
            Norm::L2 => 2,
        }
    }

    pub fn from_p(p: u8) -> Result<Self> {
        match p {
            1 => Ok(Norm::L1),
            2 => Ok(Norm::L2),
            other => Err(invalid(format!("norm must be 1 or 2, got {other}"))),
        }
    }
}

/// Mean of `|e|^p` over all samples of a residual.
pub fn residual_error(e: &View, p: Norm) -> f64 {
    let sum: f64 = match p {
        Norm::L1 => e.data().iter().map(|v| v.abs()).sum(),
        Norm::L2 => e.data().iter().map(|v| v * v).sum(),
    };
    sum / e.len() as f64
}

/// Derivative of [`residual_error`] with respect to each residual sample.
/// The `p = 1` subgradient at zero is zero.
pub fn residual_error_derivative(e: &View, p: Norm) -> View {
    let inv = 1.0 / e.len() as f64;
    match p {
        Norm::L1 => e.map(|v| {
            if v > 0.0 {
                inv
            } else if v < 0.0 {
                -inv
            } else {
                0.0
            }
        }),
        Norm::L2 => e.map(|v| 2.0 * inv * v),
    }
}

/// MAE (`p = 1`) or MSE (`p = 2`) between two views, averaged over `H·W·C`.
pub fn base_error(a: &View, b: &View, p: Norm) -> Result<f64> {
    Ok(residual_error(&a.sub(b)?, p))
}

/// View-wise error: the sum over views of [`base_error`].
pub fn vwe(lhat: &LightField, l: &LightField, p: Norm) -> Result<f64> {
    lhat.check_same_shape(l)?;
    Ok(lhat
        .views()
        .iter()
        .zip(l.views())
        .map(|(a, b)| residual_error(&a.sub(b).expect("shapes checked"), p))
        .sum())
}

/// How RIE weights the node `k` whose refocus parameter is `s·k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum WeightConvention {
    /// `g(s·k)`: the Gaussian of the refocus parameter itself.
    Physical,
    /// `g(k)`: the Gaussian of the summation index.
    Index,
}

impl WeightConvention {
    pub fn name(self) -> &'static str {
        match self {
            WeightConvention::Physical => "physical",
            WeightConvention::Index => "index",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "physical" => Ok(Self::Physical),
            "index" => Ok(Self::Index),
            other => Err(invalid(format!("unknown weight convention `{other}`"))),
        }
    }
}

/// `g(r) = exp(-r²)`.
pub fn gaussian(r: f64) -> f64 {
    (-r * r).exp()
}

/// Parameters of the discrete refocused image error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RieParams {
    /// Largest refocus magnitude `D`.
    pub d: f64,
    /// Node spacing `s`.
    pub step: f64,
    pub convention: WeightConvention,
    pub engine: ShiftEngine,
}

impl Default for RieParams {
    fn default() -> Self {
        Self {
            d: 2.5,
            step: 0.25,
            convention: WeightConvention::Physical,
            engine: ShiftEngine::spectral(),
        }
    }
}

impl RieParams {
    pub fn validate(&self) -> Result<()> {
        self.half_count().map(|_| ())
    }

    /// `D / s`, which must be a positive integer.
    pub fn half_count(&self) -> Result<usize> {
        if !(self.d > 0.0) || !self.d.is_finite() {
            return Err(invalid(format!("D must be positive, got {}", self.d)));
        }
        integer_ratio(self.d, self.step, "D / s")
    }

    /// Node weight `w(k)` before the `1 / 2D` prefactor.
    pub fn weight(&self, k: i64) -> f64 {
        match self.convention {
            WeightConvention::Physical => gaussian(self.step * k as f64),
            WeightConvention::Index => gaussian(k as f64),
        }
    }
}

fn integer_ratio(num: f64, den: f64, what: &str) -> Result<usize> {
    if !(den > 0.0) || !den.is_finite() {
        return Err(invalid(format!("{what}: step must be positive, got {den}")));
    }
    let ratio = num / den;
    let k = ratio.round();
    if k < 1.0 || (ratio - k).abs() > 1e-9 * ratio.abs().max(1.0) {
        return Err(invalid(format!(
            "{what} = {num} / {den} = {ratio} is not a positive integer"
        )));
    }
    Ok(k as usize)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureNode {
    pub r: f64,
    pub weight: f64,
}

/// Refocus parameters and weights of a refocus-domain loss.
#[derive(Clone, Debug, PartialEq)]
pub struct RefocusQuadrature {
    nodes: Vec<QuadratureNode>,
}

impl RefocusQuadrature {
    pub fn from_nodes(nodes: Vec<QuadratureNode>) -> Self {
        Self { nodes }
    }

    /// Discrete RIE nodes `r = s·k`, weights `w(k) / 2D`.
    pub fn rie(params: &RieParams) -> Result<Self> {
        let half = params.half_count()? as i64;
        let norm = 1.0 / (2.0 * params.d);
        let nodes = (-half..=half)
            .map(|k| QuadratureNode {
                r: params.step * k as f64,
                weight: params.weight(k) * norm,
            })
            .collect();
        Ok(Self { nodes })
    }

    /// Trapezoidal rule for `1/2D ∫_{-D}^{D} f(r) dr` with spacing `q`.
    pub fn ucrie(d: f64, q: f64) -> Result<Self> {
        let n = integer_ratio(2.0 * d, q, "2D / q")?;
        let norm = 1.0 / (2.0 * d);
        Ok(Self::trapezoid(-d, q, n, |_| norm))
    }

    /// Trapezoidal rule for `1/2D ∫_{-r_max}^{r_max} g(r) f(r) dr` with spacing `q`.
    pub fn crie(d: f64, r_max: f64, q: f64) -> Result<Self> {
        if !(d > 0.0) {
            return Err(invalid(format!("D must be positive, got {d}")));
        }
        if !(r_max >= 3.0) {
            return Err(invalid(format!(
                "CRIE truncation must be at least 3, got {r_max}"
            )));
        }
        let n = integer_ratio(2.0 * r_max, q, "2 r_max / q")?;
        let norm = 1.0 / (2.0 * d);
        Ok(Self::trapezoid(-r_max, q, n, |r| norm * gaussian(r)))
    }

    fn trapezoid(start: f64, q: f64, intervals: usize, weight: impl Fn(f64) -> f64) -> Self {
        let nodes = (0..=intervals)
            .map(|i| {
                let r = start + q * i as f64;
                let end = if i == 0 || i == intervals { 0.5 } else { 1.0 };
                QuadratureNode {
                    r,
                    weight: end * q * weight(r),
                }
            })
            .collect();
        Self { nodes }
    }

    pub fn nodes(&self) -> &[QuadratureNode] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.nodes.iter().map(|n| n.weight).sum()
    }
}

/// `Σ_k weight_k · base_error(R(L̂, r_k), R(L, r_k), p)`.
pub fn refocused_error(
    lhat: &LightField,
    l: &LightField,
    p: Norm,
    quadrature: &RefocusQuadrature,
    engine: ShiftEngine,
) -> Result<f64> {
    let err = lhat.sub(l)?;
    let refocuser = Refocuser::new(&err, engine);
    let terms: Vec<f64> = quadrature
        .nodes()
        .par_iter()
        .map(|node| node.weight * residual_error(&refocuser.refocus(node.r), p))
        .collect();
    Ok(terms.iter().sum())
}

/// Unweighted continuous refocused image error, trapezoidal with spacing `q`.
pub fn ucrie(
    lhat: &LightField,
    l: &LightField,
    p: Norm,
    d: f64,
    q: f64,
    engine: ShiftEngine,
) -> Result<f64> {
    refocused_error(lhat, l, p, &RefocusQuadrature::ucrie(d, q)?, engine)
}

/// Gaussian-weighted continuous refocused image error truncated to
/// `[-r_max, r_max]`; `d` only enters through the `1 / 2D` prefactor.
pub fn crie(
    lhat: &LightField,
    l: &LightField,
    p: Norm,
    d: f64,
    r_max: f64,
    q: f64,
    engine: ShiftEngine,
) -> Result<f64> {
    refocused_error(lhat, l, p, &RefocusQuadrature::crie(d, r_max, q)?, engine)
}

/// Discrete refocused image error.
pub fn rie(lhat: &LightField, l: &LightField, p: Norm, params: &RieParams) -> Result<f64> {
    refocused_error(lhat, l, p, &RefocusQuadrature::rie(params)?, params.engine)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LossKind {
    Vwe,
    Ucrie,
    Crie,
    Rie,
    VweRie,
}

/// A complete loss configuration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossSpec {
    pub norm: Norm,
    pub kind: LossKind,
    /// Weight of the RIE term; only read when `kind` is [`LossKind::VweRie`].
    pub lambda: f64,
    pub rie: RieParams,
    /// Trapezoidal spacing for UCRIE and CRIE.
    pub quad_step: f64,
    /// CRIE truncation radius.
    pub crie_r_max: f64,
}

impl LossSpec {
    pub fn new(norm: Norm, kind: LossKind) -> Self {
        Self {
            norm,
            kind,
            lambda: 1.0,
            rie: RieParams::default(),
            quad_step: 0.01,
            crie_r_max: 4.0,
        }
    }

    pub fn vwe(norm: Norm) -> Self {
        Self::new(norm, LossKind::Vwe)
    }

    /// VWE plus `lambda` times RIE, with default RIE parameters.
    pub fn vwe_rie(norm: Norm, lambda: f64) -> Self {
        Self {
            lambda,
            ..Self::new(norm, LossKind::VweRie)
        }
    }

    pub fn with_rie(mut self, rie: RieParams) -> Self {
        self.rie = rie;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(invalid(format!(
                "lambda must be a finite value >= 0, got {}",
                self.lambda
            )));
        }
        self.refocus_quadrature().map(|_| ())
    }

    /// Canonical short label, e.g. `vwe2+rie2`.
    pub fn label(&self) -> String {
        let p = self.norm.p();
        match self.kind {
            LossKind::Vwe => format!("vwe{p}"),
            LossKind::Ucrie => format!("ucrie{p}"),
            LossKind::Crie => format!("crie{p}"),
            LossKind::Rie => format!("rie{p}"),
            LossKind::VweRie => format!("vwe{p}+rie{p}"),
        }
    }

    /// Parses a label produced by [`LossSpec::label`] with default parameters.
    pub fn from_label(label: &str) -> Result<Self> {
        let bad = || {
            Error::Parse {
            what: "loss kind".into(),
            reason: format!("`{label}` is not one of vwe1, vwe2, ucrie1/2, crie1/2, rie1/2, vwe1+rie1, vwe2+rie2"),
        }
        };
        let split = |term: &str| -> Option<(String, u8)> {
            let digit = term.chars().last()?.to_digit(10)? as u8;
            Some((term[..term.len() - 1].to_string(), digit))
        };
        let terms: Vec<&str> = label.trim().split('+').collect();
        let parsed: Vec<(String, u8)> = terms
            .iter()
            .map(|t| split(t.trim()))
            .collect::<Option<_>>()
            .ok_or_else(bad)?;
        let norm = Norm::from_p(parsed[0].1).map_err(|_| bad())?;
        let kind = match parsed.as_slice() {
            [(a, _)] if a == "vwe" => LossKind::Vwe,
            [(a, _)] if a == "ucrie" => LossKind::Ucrie,
            [(a, _)] if a == "crie" => LossKind::Crie,
            [(a, _)] if a == "rie" => LossKind::Rie,
            [(a, p1), (b, p2)] if a == "vwe" && b == "rie" && p1 == p2 => LossKind::VweRie,
            _ => return Err(bad()),
        };
        Ok(Self::new(norm, kind))
    }

    /// Weight of the view-wise term in the total.
    pub fn vwe_weight(&self) -> f64 {
        match self.kind {
            LossKind::Vwe | LossKind::VweRie => 1.0,
            _ => 0.0,
        }
    }

    /// Weight of the refocus-domain term in the total.
    pub fn refocus_weight(&self) -> f64 {
        match self.kind {
            LossKind::Vwe => 0.0,
            LossKind::VweRie => self.lambda,
            _ => 1.0,
        }
    }

    /// Nodes of the refocus-domain term, if the loss has one.
    pub fn refocus_quadrature(&self) -> Result<Option<RefocusQuadrature>> {
        match self.kind {
            LossKind::Vwe => Ok(None),
            LossKind::Rie | LossKind::VweRie => RefocusQuadrature::rie(&self.rie).map(Some),
            LossKind::Ucrie => RefocusQuadrature::ucrie(self.rie.d, self.quad_step).map(Some),
            LossKind::Crie => {
                RefocusQuadrature::crie(self.rie.d, self.crie_r_max, self.quad_step).map(Some)
            }
        }
    }

    /// Plain-text `key=value` block, one key per line.
    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "kind={}", self.label());
        let _ = writeln!(out, "D={}", self.rie.d);
        let _ = writeln!(out, "s={}", self.rie.step);
        let _ = writeln!(out, "lambda={}", self.lambda);
        let _ = writeln!(out, "convention={}", self.rie.convention.name());
        let _ = writeln!(out, "engine={}", self.rie.engine.name());
        let _ = writeln!(out, "q={}", self.quad_step);
        let _ = writeln!(out, "r_max={}", self.crie_r_max);
        out
    }

    /// Parses a `key=value` block. Unknown keys are rejected; missing keys
    /// keep their defaults. `kind` is required.
    pub fn from_kv(text: &str) -> Result<Self> {
        let mut spec: Option<LossSpec> = None;
        let mut rest = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                what: "loss spec".into(),
                reason: format!("line {}: expected key=value, got `{line}`", lineno + 1),
            })?;
            let (key, value) = (key.trim(), value.trim());
            if key == "kind" {
                spec = Some(LossSpec::from_label(value)?);
            } else {
                rest.push((key.to_string(), value.to_string()));
            }
        }
        let mut spec = spec.ok_or_else(|| Error::Parse {
            what: "loss spec".into(),
            reason: "missing `kind`".into(),
        })?;
        let num = |key: &str, value: &str| -> Result<f64> {
            value.parse::<f64>().map_err(|e| Error::Parse {
                what: format!("loss spec key `{key}`"),
                reason: e.to_string(),
            })
        };
        for (key, value) in rest {
            match key.as_str() {
                "D" => spec.rie.d = num(&key, &value)?,
                "s" => spec.rie.step = num(&key, &value)?,
                "lambda" => spec.lambda = num(&key, &value)?,
                "convention" => spec.rie.convention = WeightConvention::parse(&value)?,
                "engine" => spec.rie.engine = ShiftEngine::parse(&value)?,
                "q" => spec.quad_step = num(&key, &value)?,
                "r_max" => spec.crie_r_max = num(&key, &value)?,
                other => {
                    return Err(Error::Parse {
                        what: "loss spec".into(),
                        reason: format!("unknown key `{other}`"),
                    })
                }
            }
        }
        spec.validate()?;
        Ok(spec)
    }
}

/// Loss value split into its terms. `refocus_term` is reported before the
/// `lambda` weighting.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossValue {
    pub total: f64,
    pub vwe_term: f64,
    pub refocus_term: f64,
}

pub fn evaluate(lhat: &LightField, l: &LightField, spec: &LossSpec) -> Result<LossValue> {
    spec.validate()?;
    let vwe_term = vwe(lhat, l, spec.norm)?;
    let refocus_term = match spec.refocus_quadrature()? {
        Some(quad) => refocused_error(lhat, l, spec.norm, &quad, spec.rie.engine)?,
        None => 0.0,
    };
    Ok(combine(spec, vwe_term, refocus_term))
}

fn combine(spec: &LossSpec, vwe_term: f64, refocus_term: f64) -> LossValue {
    let total = match spec.kind {
        LossKind::Vwe => vwe_term,
        LossKind::VweRie => vwe_term + spec.lambda * refocus_term,
        _ => refocus_term,
    };
    LossValue {
        total,
        vwe_term,
        refocus_term,
    }
}

/// The scalar loss selected by `spec`.
pub fn combined_loss(lhat: &LightField, l: &LightField, spec: &LossSpec) -> Result<f64> {
    evaluate(lhat, l, spec).map(|v| v.total)
}

/// Gradient of [`combined_loss`] with respect to every sample of `lhat`.
pub fn loss_gradient(lhat: &LightField, l: &LightField, spec: &LossSpec) -> Result<LightField> {
    value_and_gradient(lhat, l, spec).map(|(_, g)| g)
}

/// Nodes per work unit of the gradient; fixed so that the reduction order
/// does not depend on the thread count.
const NODES_PER_CHUNK: usize = 8;

/// Loss value and its gradient in one pass.
pub fn value_and_gradient(
    lhat: &LightField,
    l: &LightField,
    spec: &LossSpec,
) -> Result<(LossValue, LightField)> {
    spec.validate()?;
    let err = lhat.sub(l)?;
    let p = spec.norm;

    let mut grad = err.zeros_like();
    let mut vwe_term = 0.0;
    let vwe_weight = spec.vwe_weight();
    for (e, g) in err.views().iter().zip(grad.views_mut()) {
        vwe_term += residual_error(e, p);
        if vwe_weight != 0.0 {
            g.axpy(vwe_weight, &residual_error_derivative(e, p));
        }
    }

    let mut refocus_term = 0.0;
    if let Some(quad) = spec.refocus_quadrature()? {
        let engine = spec.rie.engine;
        let refocuser = Refocuser::new(&err, engine);
        let dims = err.view_dims();
        let radius = err.radius();
        let chunks: Vec<(Vec<f64>, AdjointAccumulator)> = quad
            .nodes()
            .par_chunks(NODES_PER_CHUNK)
            .map(|nodes| {
                let mut acc = AdjointAccumulator::new(radius, dims, engine);
                let mut terms = Vec::with_capacity(nodes.len());
                for node in nodes {
                    let e = refocuser.refocus(node.r);
                    terms.push(node.weight * residual_error(&e, p));
                    acc.add(&residual_error_derivative(&e, p), node.r, node.weight)
                        .expect("refocused image matches the light field");
                }
                (terms, acc)
            })
            .collect();
        let mut total_acc: Option<AdjointAccumulator> = None;
        let mut terms = Vec::with_capacity(quad.len());
        for (t, acc) in chunks {
            terms.extend(t);
            match total_acc.as_mut() {
                Some(a) => a.merge(acc),
                None => total_acc = Some(acc),
            }
        }
        refocus_term = terms.iter().sum();
        let back = total_acc.expect("quadrature has nodes").finish();
        let weight = spec.refocus_weight();
        if weight != 0.0 {
            grad.axpy(weight, &back);
        }
    }

    Ok((combine(spec, vwe_term, refocus_term), grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::refocus::Boundary;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(rng: &mut ChaCha8Rng, n: usize, h: usize, w: usize, c: usize) -> LightField {
        LightField::from_fn(n, |_| View::from_fn(h, w, c, |_, _, _| rng.gen())).unwrap()
    }

    #[test]
    fn base_error_constant_offset() {
        let a = View::filled(4, 5, 3, 0.3);
        let b = a.map(|v| v + 0.1);
        assert!((base_error(&a, &b, Norm::L1).unwrap() - 0.1).abs() < 1e-15);
        assert!((base_error(&a, &b, Norm::L2).unwrap() - 0.01).abs() < 1e-15);
        assert_eq!(base_error(&a, &a, Norm::L2).unwrap(), 0.0);
        assert!(base_error(&a, &View::zeros(4, 5, 1), Norm::L1).is_err());
    }

    #[test]
    fn base_error_matches_naive_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = View::from_fn(7, 6, 3, |_, _, _| rng.gen());
        let b = View::from_fn(7, 6, 3, |_, _, _| rng.gen());
        let (mut l1, mut l2) = (0.0, 0.0);
        for y in 0..7 {
            for x in 0..6 {
                for c in 0..3 {
                    let d = a.get(y, x, c) - b.get(y, x, c);
                    l1 += d.abs();
                    l2 += d * d;
                }
            }
        }
        assert!((base_error(&a, &b, Norm::L1).unwrap() - l1 / 126.0).abs() < 1e-14);
        assert!((base_error(&a, &b, Norm::L2).unwrap() - l2 / 126.0).abs() < 1e-14);
    }

    #[test]
    fn vwe_constant_offset_sums_over_views() {
        let l = LightField::constant(2, 4, 4, 1, 0.4);
        let lhat = l.map(|v| v + 0.1);
        assert!((vwe(&lhat, &l, Norm::L1).unwrap() - 2.5).abs() < 1e-12);
        assert!((vwe(&lhat, &l, Norm::L2).unwrap() - 0.25).abs() < 1e-12);
        assert_eq!(vwe(&l, &l, Norm::L1).unwrap(), 0.0);
    }

    #[test]
    fn rie_constant_offset_closed_form() {
        let l = LightField::constant(1, 6, 6, 1, 0.4);
        let lhat = l.map(|v| v + 0.1);
        let weight_sum: f64 = (-10..=10).map(|k| (-(0.25 * k as f64).powi(2)).exp()).sum();
        let expect = 0.01 * weight_sum / 5.0;
        let got = rie(&lhat, &l, Norm::L2, &RieParams::default()).unwrap();
        assert!((got - expect).abs() < 1e-12, "{got} vs {expect}");
        assert!((weight_sum - 7.088_466_308_673).abs() < 1e-11);
    }

    #[test]
    fn ucrie_and_crie_constant_offset() {
        let l = LightField::constant(1, 5, 5, 1, 0.2);
        let lhat = l.map(|v| v + 0.1);
        let u = ucrie(&lhat, &l, Norm::L2, 2.5, 0.01, ShiftEngine::spectral()).unwrap();
        assert!((u - 0.01).abs() < 1e-12);
        let c = crie(&lhat, &l, Norm::L2, 2.5, 4.0, 0.01, ShiftEngine::spectral()).unwrap();
        let expect = 0.01 * std::f64::consts::PI.sqrt() / 5.0;
        assert!((c - expect).abs() < 1e-6, "{c} vs {expect}");
    }

    #[test]
    fn rejects_invalid_steps() {
        let bad = RieParams {
            step: 0.3,
            ..RieParams::default()
        };
        assert!(bad.validate().is_err());
        assert!(RefocusQuadrature::ucrie(2.5, 0.3).is_err());
        assert!(RefocusQuadrature::crie(2.5, 2.0, 0.01).is_err());
        assert!(RefocusQuadrature::ucrie(2.5, 0.0).is_err());
    }

    #[test]
    fn single_view_degenerate_case() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let l = random_field(&mut rng, 0, 6, 6, 1);
        let lhat = random_field(&mut rng, 0, 6, 6, 1);
        for convention in [WeightConvention::Physical, WeightConvention::Index] {
            let params = RieParams {
                convention,
                ..RieParams::default()
            };
            for p in [Norm::L1, Norm::L2] {
                let sum: f64 = (-10..=10).map(|k| params.weight(k)).sum();
                let expect = sum / 5.0 * base_error(&lhat.views()[0], &l.views()[0], p).unwrap();
                let got = rie(&lhat, &l, p, &params).unwrap();
                assert!((got - expect).abs() < 1e-12 * expect.max(1.0));
            }
        }
    }

    #[test]
    fn labels_round_trip() {
        for label in [
            "vwe1",
            "vwe2",
            "ucrie2",
            "crie1",
            "rie2",
            "vwe1+rie1",
            "vwe2+rie2",
        ] {
            assert_eq!(LossSpec::from_label(label).unwrap().label(), label);
        }
        assert!(LossSpec::from_label("vwe1+rie2").is_err());
        assert!(LossSpec::from_label("mse").is_err());
        assert!(LossSpec::from_label("vwe3").is_err());
    }

    #[test]
    fn kv_block() {
        let text =
            "kind=vwe1+rie1\nD=2.5\ns=0.25\nlambda=1\nconvention=physical\nengine=spectral\n";
        let spec = LossSpec::from_kv(text).unwrap();
        assert_eq!(spec, LossSpec::vwe_rie(Norm::L1, 1.0));
        assert_eq!(LossSpec::from_kv(&spec.to_kv()).unwrap(), spec);
        assert!(LossSpec::from_kv("kind=vwe2\nfoo=1\n").is_err());
        assert!(LossSpec::from_kv("D=2.5\n").is_err());
        assert!(LossSpec::from_kv("kind=rie2\ns=0.3\n").is_err());
    }

    #[test]
    fn lambda_zero_equals_vwe() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let l = random_field(&mut rng, 1, 5, 5, 1);
        let lhat = random_field(&mut rng, 1, 5, 5, 1);
        let spec = LossSpec::vwe_rie(Norm::L2, 0.0);
        assert_eq!(
            combined_loss(&lhat, &l, &spec).unwrap(),
            vwe(&lhat, &l, Norm::L2).unwrap()
        );
    }

    #[test]
    fn quadratic_gradient_without_rie() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let l = random_field(&mut rng, 1, 4, 4, 3);
        let lhat = random_field(&mut rng, 1, 4, 4, 3);
        let grad = loss_gradient(&lhat, &l, &LossSpec::vwe_rie(Norm::L2, 0.0)).unwrap();
        let m = 48.0;
        for ((g, a), b) in grad.samples().zip(lhat.samples()).zip(l.samples()) {
            assert!((g - 2.0 / m * (a - b)).abs() < 1e-15);
        }
        let zero = loss_gradient(&l, &l, &LossSpec::vwe_rie(Norm::L2, 1.0)).unwrap();
        assert!(zero.samples().all(|g| g == 0.0));
    }

    #[test]
    fn gradient_matches_finite_differences_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let l = random_field(&mut rng, 1, 4, 5, 1);
        let lhat = random_field(&mut rng, 1, 4, 5, 1);
        for engine in [
            ShiftEngine::spectral(),
            ShiftEngine::bilinear(Boundary::Clamp),
        ] {
            let spec = LossSpec::vwe_rie(Norm::L2, 1.0).with_rie(RieParams {
                engine,
                ..RieParams::default()
            });
            let grad = loss_gradient(&lhat, &l, &spec).unwrap();
            let h = 1e-5;
            let mut worst: f64 = 0.0;
            let scale = grad.samples().fold(0.0f64, |m, g| m.max(g.abs()));
            for (vi, view) in lhat.views().iter().enumerate() {
                for i in 0..view.len() {
                    let mut plus = lhat.clone();
                    plus.views_mut()[vi].data_mut()[i] += h;
                    let mut minus = lhat.clone();
                    minus.views_mut()[vi].data_mut()[i] -= h;
                    let fd = (combined_loss(&plus, &l, &spec).unwrap()
                        - combined_loss(&minus, &l, &spec).unwrap())
                        / (2.0 * h);
                    worst = worst.max((fd - grad.views()[vi].data()[i]).abs() / scale);
                }
            }
            assert!(worst < 1e-6, "{engine}: {worst}");
        }
    }
}
