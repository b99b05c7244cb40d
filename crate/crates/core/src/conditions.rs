//! Numerical evidence for the existence hypotheses: circle means of
//! majorants, divergence of `∫ dr / (r q(r))`, finite mean oscillation,
//! admissibility of a control function `ψ`, and sampled dilatation bounds.
//!
//! Every verdict is heuristic and carries the numbers it was derived from.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coefficients::CoefficientSpec;
use crate::dilatation::{maximal_dilatation, tangential_dilatation};
use crate::error::{Error, Result, Witness};
use crate::expr::{self, Bindings, Expr, SCALAR_VARS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MajorantRole {
    /// Bound for the maximal dilatation.
    Q,
    /// Bound for the tangential dilatation about a centre.
    Q1,
}

/// Nonnegative majorant `q(z)`; `w` is bound to 0 when evaluating.
#[derive(Debug, Clone, PartialEq)]
pub struct MajorantSpec {
    pub expr: Expr,
    pub role: MajorantRole,
}

impl MajorantSpec {
    pub fn parse(text: &str, role: MajorantRole) -> Result<Self> {
        Ok(Self { expr: expr::parse(text)?, role })
    }

    pub fn eval(&self, z: Complex64) -> Result<f64> {
        let v = self.expr.eval(&Bindings::plane(z, Complex64::new(0.0, 0.0)))?;
        if v.im.abs() > 1e-12 * v.re.abs().max(1.0) || v.re < 0.0 {
            return Err(Error::Eval(format!("majorant {} is not a nonnegative real at z = {z}: {v}", self.expr)));
        }
        Ok(v.re)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DivergenceVerdict {
    Divergent,
    Convergent,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FmoVerdict {
    LikelyFmo,
    LikelyNotFmo,
    Inconclusive,
}

/// Partial integrals `I(ε)` along a decreasing ladder with the slope evidence for the verdict.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DivergenceReport {
    pub delta: f64,
    pub eps: Vec<f64>,
    pub integrals: Vec<f64>,
    /// `ΔI / Δlog(1/ε)` between consecutive ladder points.
    pub slopes: Vec<f64>,
    /// Fitted exponent `p` in `slope ~ log(1/ε)^(−p)` over the tail of the ladder.
    pub decay_exponent: Option<f64>,
    /// Limit estimate when the verdict is convergent.
    pub limit: Option<f64>,
    pub verdict: DivergenceVerdict,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FmoReport {
    pub eps: Vec<f64>,
    pub means: Vec<f64>,
    pub oscillations: Vec<f64>,
    pub verdict: FmoVerdict,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PsiReport {
    pub eps0: f64,
    pub eps: Vec<f64>,
    /// `I(ε, ε₀) = ∫_ε^{ε₀} ψ`.
    pub integrals: Vec<f64>,
    /// `∫_{ε<|z−z₀|<ε₀} q₁ ψ²(|z − z₀|) dm / I²`.
    pub ratios: Vec<f64>,
    pub positive_finite: bool,
    pub grows: DivergenceVerdict,
    pub ratio_to_zero: bool,
    pub admissible: bool,
}

/// Nodes on circles and tolerances shared by the audits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuditConfig {
    pub circle_nodes: usize,
    pub delta: f64,
    pub divergence_ladder: Vec<f64>,
    pub fmo_ladder: Vec<f64>,
    /// Samples per axis of the square grid over the audit disk.
    pub z_samples: usize,
    /// Radius of the audited disk about the origin; the coefficient support when absent.
    pub domain_radius: Option<f64>,
    /// Largest `|w|` sampled.
    pub w_max: f64,
    pub w_phases: usize,
    pub thetas: usize,
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self {
            circle_nodes: 64,
            delta: 0.5,
            divergence_ladder: (1..=8).map(|k| 0.5 * 10f64.powi(-k)).collect(),
            fmo_ladder: (3..=12).map(|k| 2f64.powi(-k)).collect(),
            z_samples: 41,
            domain_radius: None,
            w_max: 100.0,
            w_phases: 8,
            thetas: 64,
        }
    }
}

impl AuditConfig {
    /// `|w|` values: 0 and a log ladder from 10⁻² up to `w_max`.
    pub fn w_moduli(&self) -> Vec<f64> {
        let mut v = vec![0.0];
        if self.w_max > 0.0 {
            let lo = 1e-2f64.min(self.w_max).log10();
            let hi = self.w_max.log10();
            let k = 9;
            v.extend((0..k).map(|i| 10f64.powf(lo + (hi - lo) * i as f64 / (k - 1) as f64)));
        }
        v
    }
}

fn check_ladder(eps: &[f64], upper: f64) -> Result<()> {
    if eps.is_empty() {
        return Err(Error::ParamOutOfRange("epsilon ladder is empty".into()));
    }
    if eps.windows(2).any(|w| w[1] >= w[0]) || eps.iter().any(|&e| !(e > 0.0)) || eps[0] >= upper {
        return Err(Error::ParamOutOfRange(format!(
            "epsilon ladder {eps:?} must decrease from below {upper} to positive values"
        )));
    }
    Ok(())
}

/// Tanh-sinh integral over `[a, b]`; non-finite results are reported as failures.
fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, what: &str) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let out = quadrature::integrate(f, a, b, 1e-12);
    if out.integral.is_finite() {
        Ok(out.integral)
    } else {
        Err(Error::QuadratureFailure(format!("{what} over [{a}, {b}]")))
    }
}

/// Runs `f` inside a quadrature, carrying the first evaluation error out.
fn fallible_integral<F>(f: F, a: f64, b: f64, what: &str) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let err = std::sync::Mutex::new(None);
    let v = integrate(
        |x| match f(x) {
            Ok(v) => v,
            Err(e) => {
                err.lock().unwrap().get_or_insert(e);
                f64::NAN
            }
        },
        a,
        b,
        what,
    );
    if let Some(e) = err.into_inner().unwrap() {
        return Err(match e {
            Error::Eval(m) => Error::QuadratureFailure(format!("{what}: {m}")),
            other => other,
        });
    }
    v
}

/// Trapezoidal mean of `q` over `|z − z0| = r` with `m` nodes.
pub fn circle_mean(q: &MajorantSpec, z0: Complex64, r: f64, m: usize) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::ParamOutOfRange(format!("circle radius {r} must be positive")));
    }
    if m < 16 {
        return Err(Error::ParamOutOfRange(format!("circle mean needs at least 16 nodes, got {m}")));
    }
    let mut s = 0.0;
    for k in 0..m {
        s += q.eval(z0 + Complex64::from_polar(r, 2.0 * PI * k as f64 / m as f64))?;
    }
    Ok(s / m as f64)
}

/// `∫_{|z − c| < radius} q dm` in polar coordinates about `c`.
pub fn disk_integral(q: &MajorantSpec, c: Complex64, radius: f64, m: usize) -> Result<f64> {
    fallible_integral(|rho| Ok(2.0 * PI * rho * circle_mean(q, c, rho, m)?), 0.0, radius, "disk integral")
}

fn classify_growth(
    eps: &[f64],
    integrals: &[f64],
    top: f64,
) -> (Vec<f64>, Option<f64>, Option<f64>, DivergenceVerdict) {
    let logs: Vec<f64> = std::iter::once(top).chain(eps.iter().copied()).map(|e| (1.0 / e).ln()).collect();
    let values: Vec<f64> = std::iter::once(0.0).chain(integrals.iter().copied()).collect();
    let slopes: Vec<f64> = (1..logs.len()).map(|k| (values[k] - values[k - 1]) / (logs[k] - logs[k - 1])).collect();
    let decades = (top / eps[eps.len() - 1]).log10();
    if decades < 4.0 || slopes.len() < 4 {
        return (slopes, None, None, DivergenceVerdict::Inconclusive);
    }
    let last = *integrals.last().unwrap();
    let tail = &slopes[slopes.len() - 3..];
    let ratios: Vec<f64> = tail.windows(2).map(|w| if w[0] > 0.0 { w[1] / w[0] } else { 0.0 }).collect();
    let worst_ratio = ratios.iter().copied().fold(0.0, f64::max);
    if worst_ratio <= 0.5 {
        // geometric tail beyond the last ladder point, one step of the same length per term
        let step = logs[logs.len() - 1] - logs[logs.len() - 2];
        let s = tail[tail.len() - 1];
        let remainder = s * step * worst_ratio / (1.0 - worst_ratio);
        if remainder <= 1e-3 * last.abs().max(1e-300) {
            return (slopes, None, Some(last + remainder), DivergenceVerdict::Convergent);
        }
    }
    // power-law decay of the slope in log(1/ε) over the last three segments
    let mids: Vec<f64> = (1..logs.len()).map(|k| 0.5 * (logs[k] + logs[k - 1])).collect();
    let k = slopes.len();
    let positive = slopes[k - 3..].iter().all(|&s| s > 0.0);
    if !positive {
        return (slopes, None, None, DivergenceVerdict::Inconclusive);
    }
    let p = -((slopes[k - 1] / slopes[k - 3]).ln()) / (mids[k - 1] / mids[k - 3]).ln();
    let verdict = if p <= DIVERGENT_EXPONENT { DivergenceVerdict::Divergent } else { DivergenceVerdict::Inconclusive };
    (slopes, Some(p), None, verdict)
}

/// Slopes decaying no faster than `log(1/ε)^(−p)` with `p` at most this are read as divergence.
const DIVERGENT_EXPONENT: f64 = 1.25;

/// `I(ε) = ∫_ε^δ dr / (r q_{z0}(r))` along `eps_ladder`, with `q_{z0}` the circle mean.
pub fn divergence_integral(
    q: &MajorantSpec,
    z0: Complex64,
    delta: f64,
    eps_ladder: &[f64],
    circle_nodes: usize,
) -> Result<DivergenceReport> {
    check_ladder(eps_ladder, delta)?;
    // t = log r turns dr / r into dt
    let integrand = |t: f64| -> Result<f64> {
        let m = circle_mean(q, z0, t.exp(), circle_nodes)?;
        if m <= 0.0 {
            return Err(Error::QuadratureFailure(format!("circle mean vanishes at r = {}", t.exp())));
        }
        Ok(1.0 / m)
    };
    let mut integrals = Vec::with_capacity(eps_ladder.len());
    let mut acc = 0.0;
    let mut upper = delta;
    for &e in eps_ladder {
        acc += fallible_integral(integrand, e.ln(), upper.ln(), "divergence integral")?;
        integrals.push(acc);
        upper = e;
    }
    let (slopes, decay_exponent, limit, verdict) = classify_growth(eps_ladder, &integrals, delta);
    Ok(DivergenceReport { delta, eps: eps_ladder.to_vec(), integrals, slopes, decay_exponent, limit, verdict })
}

/// Disk means and mean absolute oscillations of `q` over `B(x0, ε)` along the ladder.
pub fn fmo_estimate(q: &MajorantSpec, x0: Complex64, eps_ladder: &[f64], circle_nodes: usize) -> Result<FmoReport> {
    check_ladder(eps_ladder, f64::INFINITY)?;
    let mut means = Vec::new();
    let mut oscillations = Vec::new();
    for &e in eps_ladder {
        let area = PI * e * e;
        let mean = disk_integral(q, x0, e, circle_nodes)? / area;
        let osc = fallible_integral(
            |rho| {
                let mut s = 0.0;
                for k in 0..circle_nodes {
                    let z = x0 + Complex64::from_polar(rho, 2.0 * PI * k as f64 / circle_nodes as f64);
                    s += (q.eval(z)? - mean).abs();
                }
                Ok(2.0 * PI * rho * s / circle_nodes as f64)
            },
            0.0,
            e,
            "mean oscillation",
        )? / area;
        means.push(mean);
        oscillations.push(osc);
    }
    let verdict = classify_oscillation(&oscillations);
    Ok(FmoReport { eps: eps_ladder.to_vec(), means, oscillations, verdict })
}

fn classify_oscillation(osc: &[f64]) -> FmoVerdict {
    let first = osc[0];
    let last = osc[osc.len() - 1];
    let max = osc.iter().copied().fold(0.0, f64::max);
    let monotone = osc.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-9));
    if osc.len() >= 2 && monotone && last >= 2.0 * first && last > 1e-12 {
        FmoVerdict::LikelyNotFmo
    } else if max <= 2.0 * first + 1e-12 {
        FmoVerdict::LikelyFmo
    } else {
        FmoVerdict::Inconclusive
    }
}

/// Control function `ψ(t)`: an expression in `t`, or `1/(t q₁(t))` with `q₁` the circle mean.
#[derive(Debug, Clone)]
pub enum Psi {
    Expr(Expr),
    Default,
}

impl Psi {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(Psi::Expr(expr::parse_with(text, SCALAR_VARS)?))
    }

    fn eval(&self, t: f64, q1: &MajorantSpec, z0: Complex64, m: usize) -> Result<f64> {
        match self {
            Psi::Expr(e) => {
                let v = e.eval(&Bindings::scalar(t))?;
                Ok(v.re)
            }
            Psi::Default => {
                let q = circle_mean(q1, z0, t, m)?;
                if q <= 0.0 {
                    return Err(Error::QuadratureFailure(format!("circle mean vanishes at t = {t}")));
                }
                Ok(1.0 / (t * q))
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
pub fn psi_admissibility(
    psi: &Psi,
    q1: &MajorantSpec,
    z0: Complex64,
    eps0: f64,
    eps_prime: f64,
    eps_ladder: &[f64],
    circle_nodes: usize,
) -> Result<PsiReport> {
    if !(eps_prime > 0.0 && eps_prime <= eps0) {
        return Err(Error::ParamOutOfRange(format!("need 0 < eps' = {eps_prime} <= eps0 = {eps0}")));
    }
    check_ladder(eps_ladder, eps_prime * (1.0 + 1e-12))?;
    let psi_at = |t: f64| psi.eval(t, q1, z0, circle_nodes);
    // integrate in log t; the Jacobian t keeps 1/t-type integrands bounded
    let mut integrals = Vec::new();
    let mut weighted = Vec::new();
    let (mut acc_i, mut acc_w) = (0.0, 0.0);
    let mut upper = eps0;
    for &e in eps_ladder {
        acc_i += fallible_integral(|s| Ok(psi_at(s.exp())? * s.exp()), e.ln(), upper.ln(), "psi integral")?;
        acc_w += fallible_integral(
            |s| {
                let t = s.exp();
                let p = psi_at(t)?;
                Ok(p * p * 2.0 * PI * t * circle_mean(q1, z0, t, circle_nodes)? * t)
            },
            e.ln(),
            upper.ln(),
            "psi annulus integral",
        )?;
        integrals.push(acc_i);
        weighted.push(acc_w);
        upper = e;
    }
    let positive_finite = integrals.iter().all(|&v| v > 0.0 && v.is_finite());
    let ratios: Vec<f64> = integrals.iter().zip(&weighted).map(|(i, w)| w / (i * i)).collect();
    let (_, _, _, grows) = classify_growth(eps_ladder, &integrals, eps0);
    let ratio_to_zero = ratios.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9))
        && ratios.last().copied().unwrap_or(f64::INFINITY) <= 0.5 * ratios[0];
    let admissible = positive_finite && grows == DivergenceVerdict::Divergent && ratio_to_zero;
    Ok(PsiReport {
        eps0,
        eps: eps_ladder.to_vec(),
        integrals,
        ratios,
        positive_finite,
        grows,
        ratio_to_zero,
        admissible,
    })
}

/// Sampled check of one bound with the worst offender.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundCheck {
    pub kind: String,
    pub samples: usize,
    pub violations: usize,
    /// Largest `value − bound`, with its location.
    pub worst: Option<Witness>,
}

impl BoundCheck {
    fn new(kind: &str) -> Self {
        Self { kind: kind.into(), samples: 0, violations: 0, worst: None }
    }

    fn observe(&mut self, w: Witness) {
        self.samples += 1;
        let excess = w.value - w.bound;
        if excess > BOUND_SLACK {
            self.violations += 1;
        }
        if self.worst.map_or(true, |old| excess > old.value - old.bound) {
            self.worst = Some(w);
        }
    }

    fn merge(mut self, other: BoundCheck) -> Self {
        self.samples += other.samples;
        self.violations += other.violations;
        if let Some(w) = other.worst {
            if self.worst.map_or(true, |old| w.value - w.bound > old.value - old.bound) {
                self.worst = Some(w);
            }
        }
        self
    }

    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

const BOUND_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProbeReport {
    pub z0: Complex64,
    pub tangential_bound: BoundCheck,
    pub q1_divergence: DivergenceReport,
    pub q1_fmo: FmoReport,
    /// The maximal-dilatation majorant tested with the same divergence integral.
    pub q_divergence: DivergenceReport,
    /// `Q¹ ∈ FMO` at `z0` or the divergence condition holds at `z0`.
    pub hypotheses_met: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConditionReport {
    pub label: String,
    pub maximal_bound: BoundCheck,
    /// `K^T ≤ K` on every sample, independent of the claimed majorants.
    pub chain_consistent: bool,
    pub probes: Vec<ProbeReport>,
    pub hypotheses_met: bool,
}

impl ConditionReport {
    /// First failed bound as an error.
    pub fn check_bounds(&self) -> Result<()> {
        let checks = std::iter::once(&self.maximal_bound).chain(self.probes.iter().map(|p| &p.tangential_bound));
        for c in checks {
            if !c.passed() {
                return Err(Error::BoundViolation {
                    kind: c.kind.clone(),
                    witness: c.worst.expect("violation has a witness"),
                });
            }
        }
        Ok(())
    }
}

/// Square-grid `z` samples over the audited disk.
pub fn audit_points(spec: &CoefficientSpec, cfg: &AuditConfig) -> Vec<Complex64> {
    let radius = cfg.domain_radius.unwrap_or(spec.support_radius);
    let n = cfg.z_samples.max(2);
    let mut pts = Vec::new();
    for j in 0..n {
        for k in 0..n {
            let z = Complex64::new(
                -radius + 2.0 * radius * k as f64 / (n - 1) as f64,
                -radius + 2.0 * radius * j as f64 / (n - 1) as f64,
            );
            if z.norm() <= radius {
                pts.push(z);
            }
        }
    }
    pts
}

/// `w` samples: the origin and `w_phases` phases on each modulus of [`AuditConfig::w_moduli`].
pub fn w_samples(cfg: &AuditConfig) -> Vec<Complex64> {
    let mut out = Vec::new();
    for m in cfg.w_moduli() {
        if m == 0.0 {
            out.push(Complex64::new(0.0, 0.0));
            continue;
        }
        for p in 0..cfg.w_phases {
            out.push(Complex64::from_polar(m, 2.0 * PI * p as f64 / cfg.w_phases as f64));
        }
    }
    out
}

/// Samples `K ≤ Q` and `K^T ≤ Q¹_{z0}` and runs the divergence and FMO tests at each probe.
pub fn audit_theorem1(
    spec: &CoefficientSpec,
    q: &MajorantSpec,
    q1_family: &[(Complex64, MajorantSpec)],
    cfg: &AuditConfig,
) -> Result<ConditionReport> {
    let points = audit_points(spec, cfg);
    let ws = w_samples(cfg);
    let thetas: Vec<f64> = (0..cfg.thetas).map(|i| 2.0 * PI * i as f64 / cfg.thetas as f64).collect();

    // coefficients at every (z, w), skipping declared singular points
    let coeffs: Vec<(Complex64, Vec<(Complex64, Complex64, Complex64)>)> = points
        .par_iter()
        .filter(|z| !spec.is_singular_point(**z))
        .map(|&z| -> Result<_> {
            let vals = ws
                .iter()
                .map(|&w| {
                    let (mu, nu) = crate::coefficients::eval_coefficients(spec, z, w)?;
                    Ok((w, mu, nu))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((z, vals))
        })
        .collect::<Result<_>>()?;

    let maximal_bound = coeffs
        .par_iter()
        .map(|(z, vals)| {
            let mut check = BoundCheck::new("K <= Q");
            // an undefined majorant (1/r at 0) bounds nothing and is skipped
            if let Ok(bound) = q.eval(*z) {
                for &(w, mu, nu) in vals {
                    let value = maximal_dilatation(mu, nu);
                    check.observe(Witness { z: *z, w, theta: 0.0, z0: None, value, bound });
                }
            }
            check
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(BoundCheck::new("K <= Q"), BoundCheck::merge);

    let chain_consistent = coeffs.par_iter().all(|(z, vals)| {
        vals.iter().all(|&(_, mu, nu)| {
            let k = maximal_dilatation(mu, nu);
            thetas.iter().all(|&t| {
                tangential_dilatation(mu, nu, *z, Complex64::new(0.0, 0.0), t)
                    .map_or(true, |kt| kt <= k * (1.0 + 1e-12))
            })
        })
    });

    let probes = q1_family
        .par_iter()
        .map(|(z0, q1)| -> Result<ProbeReport> {
            let kind = format!("K^T <= Q1 at z0 = {z0}");
            let mut tangential_bound = BoundCheck::new(&kind);
            for (z, vals) in &coeffs {
                if z == z0 {
                    continue;
                }
                let Ok(bound) = q1.eval(*z) else { continue };
                for &(w, mu, nu) in vals {
                    for &theta in &thetas {
                        let value = tangential_dilatation(mu, nu, *z, *z0, theta)?;
                        tangential_bound.observe(Witness { z: *z, w, theta, z0: Some(*z0), value, bound });
                    }
                }
            }
            let q1_divergence = divergence_integral(q1, *z0, cfg.delta, &cfg.divergence_ladder, cfg.circle_nodes)?;
            let q1_fmo = fmo_estimate(q1, *z0, &cfg.fmo_ladder, cfg.circle_nodes)?;
            let q_divergence = divergence_integral(q, *z0, cfg.delta, &cfg.divergence_ladder, cfg.circle_nodes)?;
            let hypotheses_met =
                q1_fmo.verdict == FmoVerdict::LikelyFmo || q1_divergence.verdict == DivergenceVerdict::Divergent;
            Ok(ProbeReport { z0: *z0, tangential_bound, q1_divergence, q1_fmo, q_divergence, hypotheses_met })
        })
        .collect::<Result<Vec<_>>>()?;

    let hypotheses_met =
        maximal_bound.passed() && probes.iter().all(|p| p.tangential_bound.passed() && p.hypotheses_met);
    Ok(ConditionReport { label: spec.label.clone(), maximal_bound, chain_consistent, probes, hypotheses_met })
}
