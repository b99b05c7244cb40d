//! Coefficient specifications `μ(z, w)`, `ν(z, w)`: evaluation, catalog,
//! spec files and truncation.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dilatation::maximal_dilatation;
use crate::error::{Error, Result};
use crate::expr::{self, Bindings, Expr, Var};

/// Two nodes closer than this are treated as the same declared singular point.
const SINGULAR_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum TruncationMode {
    /// Keep the coefficients where the majorant `Q(z) ≤ n`.
    ByQ(Expr),
    /// Keep the coefficients where `K_{μ,ν}(z, w) ≤ n`.
    ByK,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruncationPredicate {
    pub mode: TruncationMode,
    pub threshold: u32,
}

impl TruncationPredicate {
    pub fn by_k(threshold: u32) -> Self {
        Self { mode: TruncationMode::ByK, threshold }
    }

    pub fn by_q(q: Expr, threshold: u32) -> Self {
        Self { mode: TruncationMode::ByQ(q), threshold }
    }

    /// Whether the coefficients survive at `z` given their raw values.
    pub fn holds(&self, z: Complex64, w: Complex64, mu: Complex64, nu: Complex64) -> bool {
        let n = self.threshold as f64;
        match &self.mode {
            TruncationMode::ByK => maximal_dilatation(mu, nu) <= n,
            // a majorant that cannot be evaluated (1/r at 0) is infinite there
            TruncationMode::ByQ(q) => q.eval(&Bindings::plane(z, w)).map(|v| v.re <= n).unwrap_or(false),
        }
    }
}

/// Catalog provenance, kept so archives can be re-checked against closed forms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogRef {
    pub name: String,
    pub params: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSpec {
    pub mu: Expr,
    pub nu: Expr,
    pub support_radius: f64,
    pub label: String,
    /// Points where `|μ| + |ν| < 1` may fail; evaluated by direct formula without the check.
    pub singular_points: Vec<Complex64>,
    pub truncations: Vec<TruncationPredicate>,
    pub catalog: Option<CatalogRef>,
}

impl CoefficientSpec {
    pub fn new(mu: Expr, nu: Expr, support_radius: f64, label: impl Into<String>) -> Result<Self> {
        if !(support_radius.is_finite() && support_radius > 0.0) {
            return Err(Error::ParamOutOfRange(format!("support_radius {support_radius} must be positive")));
        }
        Ok(Self {
            mu,
            nu,
            support_radius,
            label: label.into(),
            singular_points: Vec::new(),
            truncations: Vec::new(),
            catalog: None,
        })
    }

    pub fn zero() -> Self {
        Self::new(Expr::zero(), Expr::zero(), 1.0, "zero").expect("valid radius")
    }

    pub fn from_text(mu: &str, nu: &str, support_radius: f64, label: &str) -> Result<Self> {
        Self::new(expr::parse(mu)?, expr::parse(nu)?, support_radius, label)
    }

    pub fn with_singular_points(mut self, points: Vec<Complex64>) -> Self {
        self.singular_points = points;
        self
    }

    /// True when neither coefficient depends on the unknown `w`.
    pub fn is_w_independent(&self) -> bool {
        !self.mu.uses(Var::W) && !self.nu.uses(Var::W)
    }

    pub fn is_singular_point(&self, z: Complex64) -> bool {
        self.singular_points.iter().any(|p| (p - z).norm() <= SINGULAR_TOL)
    }

    /// Raw formula values inside the support, without ellipticity or truncation.
    pub fn eval_raw(&self, z: Complex64, w: Complex64) -> Result<(Complex64, Complex64)> {
        let zero = Complex64::new(0.0, 0.0);
        if z.norm() > self.support_radius {
            return Ok((zero, zero));
        }
        let b = Bindings::plane(z, w);
        let mu = if self.mu.is_zero_constant() { zero } else { self.mu.eval(&b)? };
        let nu = if self.nu.is_zero_constant() { zero } else { self.nu.eval(&b)? };
        Ok((mu, nu))
    }
}

/// `(μ(z, w), ν(z, w))` with support cut-off, ellipticity check and any truncations applied.
pub fn eval_coefficients(spec: &CoefficientSpec, z: Complex64, w: Complex64) -> Result<(Complex64, Complex64)> {
    let zero = Complex64::new(0.0, 0.0);
    let (mu, nu) = spec.eval_raw(z, w)?;
    let sum = mu.norm() + nu.norm();
    if sum >= 1.0 && !spec.is_singular_point(z) {
        return Err(Error::EllipticityViolation { z, w, sum });
    }
    if spec.truncations.iter().all(|p| p.holds(z, w, mu, nu)) {
        Ok((mu, nu))
    } else {
        Ok((zero, zero))
    }
}

pub fn truncate_spec(spec: &CoefficientSpec, pred: TruncationPredicate) -> Result<CoefficientSpec> {
    if pred.threshold < 1 {
        return Err(Error::ParamOutOfRange("truncation threshold must be >= 1".into()));
    }
    let mut out = spec.clone();
    out.truncations.push(pred);
    Ok(out)
}

/// Catalog entries as `(name, parameter description)`.
pub const CATALOG: &[(&str, &str)] = &[
    ("constant-disk", "[k], |k| < 1: mu = k on |z| <= 1, nu = 0"),
    ("constant-disk-nu", "[k], |k| < 1: mu = 0, nu = k on |z| <= 1"),
    ("radial-power", "[k, a], |k| < 1, a >= 0: mu = k r^a on |z| <= 1, nu = 0"),
    ("w-damped-disk", "[k], |k| < 1: mu = k / (1 + |w|^2) on |z| <= 1, nu = 0"),
    ("paper-example-sec4", "[]: mu = e^(i theta) (1 - r - |w|) / (1 + r + |w|) on the unit disk, nu = 0"),
    ("paper-example-sec4-phase2", "[]: mu = e^(2 i theta) (1 - r - |w|) / (1 + r + |w|) on the unit disk, nu = 0"),
];

fn expect_params(name: &str, params: &[f64], count: usize) -> Result<()> {
    if params.len() != count {
        return Err(Error::ParamOutOfRange(format!("{name} takes {count} parameter(s), got {}", params.len())));
    }
    if let Some(p) = params.iter().find(|p| !p.is_finite()) {
        return Err(Error::ParamOutOfRange(format!("{name}: non-finite parameter {p}")));
    }
    Ok(())
}

fn modulus_below_one(name: &str, k: f64) -> Result<()> {
    if k.abs() >= 1.0 {
        return Err(Error::ParamOutOfRange(format!("{name}: |k| = {} must be < 1", k.abs())));
    }
    Ok(())
}

pub fn builtin_catalog(name: &str, params: &[f64]) -> Result<CoefficientSpec> {
    let lit = |v: f64| format!("{v:?}");
    let (mu, nu, singular) = match name {
        "constant-disk" => {
            expect_params(name, params, 1)?;
            modulus_below_one(name, params[0])?;
            (lit(params[0]), "0".to_string(), vec![])
        }
        "constant-disk-nu" => {
            expect_params(name, params, 1)?;
            modulus_below_one(name, params[0])?;
            ("0".to_string(), lit(params[0]), vec![])
        }
        "radial-power" => {
            expect_params(name, params, 2)?;
            modulus_below_one(name, params[0])?;
            if params[1] < 0.0 {
                return Err(Error::ParamOutOfRange(format!("{name}: exponent {} must be >= 0", params[1])));
            }
            (format!("{}*r^{}", lit(params[0]), lit(params[1])), "0".to_string(), vec![])
        }
        "w-damped-disk" => {
            expect_params(name, params, 1)?;
            modulus_below_one(name, params[0])?;
            (format!("{}/(1+abs(w)^2)", lit(params[0])), "0".to_string(), vec![])
        }
        "paper-example-sec4" | "paper-example-sec4-phase2" => {
            expect_params(name, params, 0)?;
            let phase = if name.ends_with("phase2") { "exp(2*i*theta)" } else { "exp(i*theta)" };
            // |mu| = 1 at z = 0 when w = 0
            (format!("{phase}*(1-r-abs(w))/(1+r+abs(w))"), "0".to_string(), vec![Complex64::new(0.0, 0.0)])
        }
        _ => return Err(Error::UnknownCatalogEntry(name.to_string())),
    };
    let mut spec = CoefficientSpec::from_text(&mu, &nu, 1.0, name)?.with_singular_points(singular);
    spec.catalog = Some(CatalogRef { name: name.to_string(), params: params.to_vec() });
    Ok(spec)
}

/// On-disk form: `mu = "<expr>"`, `nu = "<expr>"`, `support_radius = <real>`, `label = "<text>"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecFile {
    pub mu: String,
    #[serde(default = "zero_text")]
    pub nu: String,
    pub support_radius: f64,
    #[serde(default)]
    pub label: String,
    /// Optional `[[re, im], …]` list of declared singular points.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub singular_points: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub catalog: Option<CatalogRef>,
}

fn zero_text() -> String {
    "0".into()
}

impl SpecFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn into_spec(self) -> Result<CoefficientSpec> {
        let mut spec = CoefficientSpec::from_text(&self.mu, &self.nu, self.support_radius, &self.label)?
            .with_singular_points(self.singular_points.iter().map(|p| Complex64::new(p[0], p[1])).collect());
        spec.catalog = self.catalog;
        Ok(spec)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("spec file serializes")
    }
}

impl From<&CoefficientSpec> for SpecFile {
    fn from(spec: &CoefficientSpec) -> Self {
        SpecFile {
            mu: spec.mu.to_string(),
            nu: spec.nu.to_string(),
            support_radius: spec.support_radius,
            label: spec.label.clone(),
            singular_points: spec.singular_points.iter().map(|p| [p.re, p.im]).collect(),
            catalog: spec.catalog.clone(),
        }
    }
}

pub fn load_spec_file(path: &Path) -> Result<CoefficientSpec> {
    SpecFile::parse(&std::fs::read_to_string(path)?)?.into_spec()
}

/// Resolves a catalog name, or a path to a spec file when no entry matches.
pub fn resolve_spec(name_or_path: &str, params: &[f64]) -> Result<CoefficientSpec> {
    if CATALOG.iter().any(|(n, _)| *n == name_or_path) {
        return builtin_catalog(name_or_path, params);
    }
    let path = Path::new(name_or_path);
    if path.exists() {
        return load_spec_file(path);
    }
    Err(Error::UnknownCatalogEntry(name_or_path.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    const ZERO: Complex64 = Complex64::new(0.0, 0.0);

    #[test]
    fn zero_spec() {
        let spec = CoefficientSpec::zero();
        assert_eq!(eval_coefficients(&spec, c(0.3, 0.2), c(5.0, 1.0)).unwrap(), (ZERO, ZERO));
    }

    #[test]
    fn example_at_quarter() {
        let spec = builtin_catalog("paper-example-sec4", &[]).unwrap();
        let (mu, nu) = eval_coefficients(&spec, c(0.25, 0.0), ZERO).unwrap();
        assert!((mu - c(0.6, 0.0)).norm() < 1e-15);
        assert_eq!(nu, ZERO);
    }

    #[test]
    fn outside_support_is_zero() {
        let spec = CoefficientSpec::from_text("z", "0", 1.0, "z").unwrap();
        assert_eq!(eval_coefficients(&spec, c(2.0, 0.0), ZERO).unwrap(), (ZERO, ZERO));
    }

    #[test]
    fn ellipticity_violation() {
        let spec = CoefficientSpec::from_text("0.6", "0.5", 1.0, "bad").unwrap();
        assert!(matches!(eval_coefficients(&spec, c(0.1, 0.0), ZERO), Err(Error::EllipticityViolation { .. })));
        // the example reaches |mu| = 1 only at its declared singular point
        let ex = builtin_catalog("paper-example-sec4", &[]).unwrap();
        let (mu, _) = eval_coefficients(&ex, ZERO, ZERO).unwrap();
        assert_eq!(mu, c(1.0, 0.0));
        let undeclared = ex.clone().with_singular_points(vec![]);
        assert!(eval_coefficients(&undeclared, ZERO, ZERO).is_err());
    }

    #[test]
    fn eval_error_propagates() {
        let spec = CoefficientSpec::from_text("0.1/(r-0.5)", "0", 1.0, "pole").unwrap();
        assert!(matches!(eval_coefficients(&spec, c(0.5, 0.0), ZERO), Err(Error::Eval(_))));
    }

    #[test]
    fn catalog_entries() {
        let spec = builtin_catalog("constant-disk", &[0.5]).unwrap();
        assert_eq!(eval_coefficients(&spec, c(0.2, 0.7), c(9.0, 0.0)).unwrap(), (c(0.5, 0.0), ZERO));
        assert_eq!(eval_coefficients(&spec, c(1.2, 0.0), ZERO).unwrap(), (ZERO, ZERO));
        assert!(matches!(builtin_catalog("constant-disk", &[1.2]), Err(Error::ParamOutOfRange(_))));
        assert!(matches!(builtin_catalog("constant-disk", &[]), Err(Error::ParamOutOfRange(_))));
        assert!(matches!(builtin_catalog("nope", &[]), Err(Error::UnknownCatalogEntry(_))));
        for (name, _) in CATALOG {
            let params: Vec<f64> = match *name {
                "radial-power" => vec![0.5, 2.0],
                n if n.starts_with("paper") => vec![],
                _ => vec![0.4],
            };
            let spec = builtin_catalog(name, &params).unwrap();
            for j in 0..20 {
                let z = Complex64::from_polar(0.05 * j as f64, 0.3 * j as f64);
                let w = Complex64::from_polar(0.5 * j as f64, 1.0);
                if spec.is_singular_point(z) {
                    continue;
                }
                let (mu, nu) = eval_coefficients(&spec, z, w).unwrap();
                assert!(mu.norm() + nu.norm() < 1.0);
            }
        }
        let phase2 = builtin_catalog("paper-example-sec4-phase2", &[]).unwrap();
        let z = Complex64::from_polar(0.3, 1.0);
        let (mu, _) = eval_coefficients(&phase2, z, c(0.2, 0.0)).unwrap();
        assert!((mu - Complex64::from_polar(0.5 / 1.5, 2.0)).norm() < 1e-15);
    }

    #[test]
    fn truncation_no_op_when_threshold_large() {
        let spec = builtin_catalog("radial-power", &[0.6, 1.0]).unwrap();
        let t = truncate_spec(&spec, TruncationPredicate::by_k(1000)).unwrap();
        for j in 0..50 {
            let z = Complex64::from_polar(0.02 * j as f64, j as f64);
            assert_eq!(eval_coefficients(&spec, z, ZERO).unwrap(), eval_coefficients(&t, z, ZERO).unwrap());
        }
    }

    #[test]
    fn truncation_by_q_zeroes_inner_disk() {
        let spec = builtin_catalog("paper-example-sec4", &[]).unwrap();
        let q = expr::parse("1/r").unwrap();
        let t = truncate_spec(&spec, TruncationPredicate::by_q(q, 4)).unwrap();
        let w = c(0.1, 0.0);
        for j in 1..100 {
            let r = 0.01 * j as f64;
            let z = Complex64::from_polar(r, 0.37 * j as f64);
            let (mu, _) = eval_coefficients(&t, z, w).unwrap();
            if r < 0.25 - 1e-12 {
                assert_eq!(mu, ZERO, "r = {r}");
            } else {
                assert_ne!(mu, ZERO, "r = {r}");
            }
        }
        assert_eq!(eval_coefficients(&t, ZERO, w).unwrap().0, ZERO);
    }

    #[test]
    fn truncation_by_k_removes_strong_constant() {
        let spec = builtin_catalog("constant-disk", &[0.9]).unwrap();
        let t = truncate_spec(&spec, TruncationPredicate::by_k(10)).unwrap();
        assert_eq!(eval_coefficients(&t, c(0.1, 0.1), ZERO).unwrap(), (ZERO, ZERO));
        let t = truncate_spec(&spec, TruncationPredicate::by_k(20)).unwrap();
        assert_eq!(eval_coefficients(&t, c(0.1, 0.1), ZERO).unwrap().0, c(0.9, 0.0));
        assert!(truncate_spec(&spec, TruncationPredicate::by_k(0)).is_err());
    }

    #[test]
    fn truncation_monotone_and_elliptic() {
        let spec = builtin_catalog("paper-example-sec4", &[]).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let pts: Vec<(Complex64, Complex64)> = (0..2000)
            .map(|_| {
                let z = Complex64::from_polar(rng.gen_range(0.0..1.0), rng.gen_range(0.0..6.3));
                let w = Complex64::from_polar(rng.gen_range(0.0..0.3), rng.gen_range(0.0..6.3));
                (z, w)
            })
            .collect();
        let mut previous: Option<Vec<bool>> = None;
        for n in [2u32, 4, 8, 16] {
            let t = truncate_spec(&spec, TruncationPredicate::by_k(n)).unwrap();
            let bound = (n as f64 - 1.0) / (n as f64 + 1.0);
            let kept: Vec<bool> = pts
                .iter()
                .map(|&(z, w)| {
                    let (mu, nu) = eval_coefficients(&t, z, w).unwrap();
                    assert!(mu.norm() + nu.norm() <= bound + 1e-12);
                    mu != ZERO
                })
                .collect();
            if let Some(prev) = &previous {
                assert!(prev.iter().zip(&kept).all(|(a, b)| !a || *b));
            }
            previous = Some(kept);
        }
    }

    #[test]
    fn continuity_in_w() {
        let spec = builtin_catalog("paper-example-sec4", &[]).unwrap();
        let z = c(0.3, -0.4);
        let w = c(0.2, 0.1);
        let (m0, _) = eval_coefficients(&spec, z, w).unwrap();
        let mut last = f64::INFINITY;
        for k in 1..8 {
            let d = 10f64.powi(-k);
            let (m1, _) = eval_coefficients(&spec, z, w + d).unwrap();
            let diff = (m1 - m0).norm();
            assert!(diff < last);
            last = diff;
        }
        assert!(last < 1e-6);
    }

    #[test]
    fn spec_file_roundtrip() {
        let text = r#"
mu = "0.5*exp(i*theta)*r"
nu = "0.1"
support_radius = 1.0
label = "demo"
"#;
        let spec = SpecFile::parse(text).unwrap().into_spec().unwrap();
        assert_eq!(spec.label, "demo");
        let again = SpecFile::parse(&SpecFile::from(&spec).to_toml()).unwrap().into_spec().unwrap();
        let z = c(0.3, 0.4);
        assert_eq!(eval_coefficients(&spec, z, ZERO).unwrap(), eval_coefficients(&again, z, ZERO).unwrap());
        assert!(SpecFile::parse("mu = \"z\"").is_err());
        assert!(SpecFile::parse("mu = \"z\"\nsupport_radius = 1.0\nbogus = 2").is_err());
        assert!(matches!(
            SpecFile::parse("mu = \"1+*z\"\nsupport_radius = 1.0").unwrap().into_spec(),
            Err(Error::Syntax { .. })
        ));
    }
}
