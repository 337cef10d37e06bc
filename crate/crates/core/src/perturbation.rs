//! Polynomial perturbations `ψ` of the sphere and the inverse field `φ`.
//!
//! Points of `C^n` are handled through the real coordinates
//! `u = (Re z₁, Im z₁, x₂, …, x_n)` of `S^n ⊂ C × R^{n−1}`. The perturbed map
//! is `Ψ(z) = z + ψ(r(z))` with the radial retraction
//! `r(z₁, x' + iy') = (z₁, x') / sqrt(|z₁|² + ‖x'‖²)`, and
//! `φ(z) = z − Ψ⁻¹(z)`, so that `z ∈ S^n_φ ⇔ z − φ(z) ∈ S^n`.

use std::collections::BTreeMap;

use dashmap::DashMap;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::solve_real;
use crate::locus::defining_map;

/// Format tag of perturbation and run-configuration documents.
pub const FORMAT_VERSION: &str = "levi-hull/1";
pub const DEFAULT_TUBE_RADIUS: f64 = 0.2;
pub const DEFAULT_NEWTON_TOL: f64 = 1e-12;
/// Seed of the sphere sampling used by [`c3_norm_estimate`].
pub const C3_SAMPLE_SEED: u64 = 0x005e_edc3;
pub const C3_SAMPLE_COUNT: usize = 12_000;

const CACHE_QUANTUM: f64 = 1e-9;
const MAX_NEWTON_ITER: usize = 50;
const CACHE_CAPACITY: usize = 200_000;

/// `coeff · Π u_i^{e_i}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub exponents: Vec<u32>,
    pub coeff: Complex64,
}

/// Complex-coefficient polynomial in the real variables `(a, b, x₂, …, x_n)`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    pub terms: Vec<Monomial>,
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

impl Polynomial {
    pub fn term(exponents: Vec<u32>, coeff: Complex64) -> Self {
        Self {
            terms: vec![Monomial { exponents, coeff }],
        }
    }

    /// `coeff · z₁^p · z̄₁^q` expanded in `a = Re z₁`, `b = Im z₁`.
    pub fn z1_power(num_vars: usize, p: u32, q: u32, coeff: Complex64) -> Self {
        let mut acc: BTreeMap<u32, Complex64> = BTreeMap::new();
        let i = Complex64::new(0.0, 1.0);
        for r in 0..=p {
            for s in 0..=q {
                let c = binomial(p, r) * binomial(q, s);
                let phase = i.powu(r) * (-i).powu(s);
                *acc.entry(r + s).or_default() += coeff * c * phase;
            }
        }
        let terms = acc
            .into_iter()
            .filter(|(_, c)| c.norm() != 0.0)
            .map(|(b_exp, c)| {
                let mut e = vec![0; num_vars];
                e[0] = p + q - b_exp;
                e[1] = b_exp;
                Monomial { exponents: e, coeff: c }
            })
            .collect();
        Self { terms }
    }

    /// Term-wise sum.
    pub fn plus(mut self, other: Polynomial) -> Self {
        self.terms.extend(other.terms);
        self
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.coeff.norm() == 0.0)
    }

    pub fn eval(&self, u: &[f64]) -> Complex64 {
        self.terms
            .iter()
            .map(|t| {
                let m: f64 = t.exponents.iter().zip(u).map(|(&e, &x)| x.powi(e as i32)).product();
                t.coeff * m
            })
            .sum()
    }

    pub fn derivative(&self, var: usize) -> Self {
        let terms = self
            .terms
            .iter()
            .filter(|t| t.exponents[var] > 0)
            .map(|t| {
                let mut e = t.exponents.clone();
                let k = e[var];
                e[var] -= 1;
                Monomial {
                    exponents: e,
                    coeff: t.coeff * k as f64,
                }
            })
            .collect();
        Self { terms }
    }
}

/// Perturbation `ψ = amplitude · (P₁, …, P_n)` of `S^n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    pub dimension: usize,
    pub amplitude: f64,
    pub components: Vec<Polynomial>,
}

impl PerturbationSpec {
    pub fn zero(dimension: usize) -> Self {
        Self {
            dimension,
            amplitude: 0.0,
            components: vec![Polynomial::default(); dimension],
        }
    }

    /// `ψ = ε·(z̄₁², 0, …, 0)`.
    pub fn conj_z1_squared(dimension: usize, amplitude: f64) -> Self {
        let mut spec = Self::zero(dimension);
        spec.amplitude = amplitude;
        spec.components[0] = Polynomial::z1_power(dimension + 1, 0, 2, Complex64::new(1.0, 0.0));
        spec
    }

    pub fn num_vars(&self) -> usize {
        self.dimension + 1
    }

    pub fn with_amplitude(&self, amplitude: f64) -> Self {
        Self {
            amplitude,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dimension < 2 {
            return Err(Error::Parse(format!("dimension {} must be at least 2", self.dimension)));
        }
        if !(self.amplitude.is_finite() && self.amplitude >= 0.0) {
            return Err(Error::Parse("amplitude must be finite and nonnegative".into()));
        }
        if self.components.len() != self.dimension {
            return Err(Error::Parse(format!(
                "expected {} components, got {}",
                self.dimension,
                self.components.len()
            )));
        }
        for t in self.components.iter().flat_map(|p| &p.terms) {
            if t.exponents.len() != self.num_vars() {
                return Err(Error::Parse(format!(
                    "exponent tuple {:?} must have {} entries",
                    t.exponents,
                    self.num_vars()
                )));
            }
            if !(t.coeff.re.is_finite() && t.coeff.im.is_finite()) {
                return Err(Error::Parse("non-finite coefficient".into()));
            }
        }
        Ok(())
    }

    /// `ψ(u)` at a point of `R^{n+1}`.
    pub fn eval(&self, u: &[f64]) -> Vec<Complex64> {
        self.components.iter().map(|p| p.eval(u) * self.amplitude).collect()
    }

    pub fn is_trivial(&self) -> bool {
        self.amplitude == 0.0 || self.components.iter().all(Polynomial::is_zero)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let doc: SpecDocument = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        doc.into_spec()
    }

    /// Serializes with every float written to 17 significant digits.
    pub fn to_toml_string(&self) -> String {
        let mut out = format!(
            "format = \"{FORMAT_VERSION}\"\ndimension = {}\namplitude = \"{}\"\n",
            self.dimension,
            fmt_f64(self.amplitude)
        );
        for (j, p) in self.components.iter().enumerate() {
            for t in &p.terms {
                let exps: Vec<String> = t.exponents.iter().map(u32::to_string).collect();
                out.push_str(&format!(
                    "\n[[term]]\ncomponent = {}\nexponents = [{}]\nre = \"{}\"\nim = \"{}\"\n",
                    j + 1,
                    exps.join(", "),
                    fmt_f64(t.coeff.re),
                    fmt_f64(t.coeff.im)
                ));
            }
        }
        out
    }
}

/// 17-significant-digit scientific notation; round-trips every finite `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_f64(field: &str, s: &str) -> Result<f64> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("{field}: '{s}' is not a decimal number")))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Parse(format!("{field}: '{s}' is not finite")))
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecDocument {
    format: String,
    dimension: usize,
    amplitude: String,
    #[serde(default)]
    term: Vec<TermDocument>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TermDocument {
    component: usize,
    exponents: Vec<u32>,
    re: String,
    #[serde(default = "zero_string")]
    im: String,
}

fn zero_string() -> String {
    "0".into()
}

impl SpecDocument {
    fn into_spec(self) -> Result<PerturbationSpec> {
        if self.format != FORMAT_VERSION {
            return Err(Error::Parse(format!(
                "unsupported format '{}', expected '{FORMAT_VERSION}'",
                self.format
            )));
        }
        if self.dimension < 2 {
            return Err(Error::Parse(format!("dimension {} must be at least 2", self.dimension)));
        }
        let mut spec = PerturbationSpec::zero(self.dimension);
        spec.amplitude = parse_f64("amplitude", &self.amplitude)?;
        for t in self.term {
            if t.component == 0 || t.component > self.dimension {
                return Err(Error::Parse(format!(
                    "component {} outside 1..={}",
                    t.component, self.dimension
                )));
            }
            let coeff = Complex64::new(parse_f64("re", &t.re)?, parse_f64("im", &t.im)?);
            spec.components[t.component - 1].terms.push(Monomial {
                exponents: t.exponents,
                coeff,
            });
        }
        spec.validate()?;
        Ok(spec)
    }
}

/// Real coordinates `(a, b, x₂, …, x_n)` and `y' = (y₂, …, y_n)` of a point.
fn split(z: &[Complex64]) -> (Vec<f64>, Vec<f64>) {
    let mut u = vec![z[0].re, z[0].im];
    u.extend(z[1..].iter().map(|c| c.re));
    let y = z[1..].iter().map(|c| c.im).collect();
    (u, y)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Euclidean distance from `z` to `S^n`.
pub fn distance_to_sphere(z: &[Complex64]) -> f64 {
    let (u, y) = split(z);
    ((norm(&u) - 1.0).powi(2) + y.iter().map(|v| v * v).sum::<f64>()).sqrt()
}

/// Radial retraction of the tube of radius `tube_radius` onto `S^n`.
pub fn retract(z: &[Complex64], tube_radius: f64) -> Result<Vec<Complex64>> {
    let dist = distance_to_sphere(z);
    if !(dist < tube_radius) {
        return Err(Error::Domain(format!(
            "point at distance {dist:.3e} lies outside the tube of radius {tube_radius}"
        )));
    }
    let (u, _) = split(z);
    let r = norm(&u);
    if r == 0.0 {
        return Err(Error::Domain("retraction undefined at (z₁, x') = 0".into()));
    }
    Ok(point_from_u(&u.iter().map(|x| x / r).collect::<Vec<_>>()))
}

fn point_from_u(u: &[f64]) -> Vec<Complex64> {
    let mut z = vec![Complex64::new(u[0], u[1])];
    z.extend(u[2..].iter().map(|&x| Complex64::new(x, 0.0)));
    z
}

/// `Ψ(z) = z + ψ(r(z))`.
pub fn forward_map(spec: &PerturbationSpec, z: &[Complex64], tube_radius: f64) -> Result<Vec<Complex64>> {
    let r = retract(z, tube_radius)?;
    let (u, _) = split(&r);
    Ok(z.iter().zip(spec.eval(&u)).map(|(a, b)| a + b).collect())
}

/// Max over a seeded sample of `S^n` of all partial derivatives of `ψ` of order ≤ 3.
pub fn c3_norm_estimate(spec: &PerturbationSpec) -> f64 {
    if spec.is_trivial() {
        return 0.0;
    }
    let vars = spec.num_vars();
    let mut polys: Vec<Polynomial> = Vec::new();
    for p in &spec.components {
        let mut layer = vec![p.clone()];
        polys.push(p.clone());
        for _ in 0..3 {
            let mut next = Vec::new();
            for q in &layer {
                for v in 0..vars {
                    let d = q.derivative(v);
                    if !d.terms.is_empty() {
                        next.push(d);
                    }
                }
            }
            polys.extend(next.iter().cloned());
            layer = next;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(C3_SAMPLE_SEED);
    let mut best = 0.0_f64;
    for _ in 0..C3_SAMPLE_COUNT {
        let mut u: Vec<f64> = (0..vars).map(|_| StandardNormal.sample(&mut rng)).collect();
        let r = norm(&u);
        u.iter_mut().for_each(|x| *x /= r);
        for p in &polys {
            best = best.max(p.eval(&u).norm());
        }
    }
    best * spec.amplitude
}

/// Inverse perturbation field `φ = id − Ψ⁻¹` on the tube `K_t`.
pub struct PhiField {
    spec: PerturbationSpec,
    tube_radius: f64,
    newton_tol: f64,
    gradients: Vec<Vec<Polynomial>>,
    trivial: bool,
    cache: DashMap<Vec<i64>, Vec<CacheEntry>>,
}

/// Query point and its `φ` value.
type CacheEntry = (Vec<Complex64>, Vec<Complex64>);

impl std::fmt::Debug for PhiField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PhiField")
            .field("spec", &self.spec)
            .field("tube_radius", &self.tube_radius)
            .field("newton_tol", &self.newton_tol)
            .finish()
    }
}

impl PhiField {
    pub fn new(spec: PerturbationSpec, tube_radius: f64, newton_tol: f64) -> Result<Self> {
        spec.validate()?;
        if !(tube_radius > 0.0 && tube_radius < 1.0) {
            return Err(Error::Domain(format!("tube radius {tube_radius} must lie in (0, 1)")));
        }
        if !(newton_tol > 0.0) {
            return Err(Error::Domain("newton tolerance must be positive".into()));
        }
        let vars = spec.num_vars();
        let gradients = spec
            .components
            .iter()
            .map(|p| (0..vars).map(|v| p.derivative(v)).collect())
            .collect();
        let trivial = spec.is_trivial();
        Ok(Self {
            spec,
            tube_radius,
            newton_tol,
            gradients,
            trivial,
            cache: DashMap::new(),
        })
    }

    pub fn with_defaults(spec: PerturbationSpec) -> Result<Self> {
        Self::new(spec, DEFAULT_TUBE_RADIUS, DEFAULT_NEWTON_TOL)
    }

    pub fn spec(&self) -> &PerturbationSpec {
        &self.spec
    }

    pub fn dimension(&self) -> usize {
        self.spec.dimension
    }

    pub fn tube_radius(&self) -> f64 {
        self.tube_radius
    }

    pub fn newton_tol(&self) -> f64 {
        self.newton_tol
    }

    pub fn is_trivial(&self) -> bool {
        self.trivial
    }

    pub fn forward(&self, z: &[Complex64]) -> Result<Vec<Complex64>> {
        forward_map(&self.spec, z, self.tube_radius)
    }

    fn check_point(&self, z: &[Complex64]) -> Result<()> {
        if z.len() != self.dimension() {
            return Err(Error::Domain(format!(
                "point has {} coordinates, expected {}",
                z.len(),
                self.dimension()
            )));
        }
        let dist = distance_to_sphere(z);
        if !(dist < self.tube_radius) {
            return Err(Error::Domain(format!(
                "point at distance {dist:.3e} lies outside the tube of radius {}",
                self.tube_radius
            )));
        }
        Ok(())
    }

    /// `Ψ` and its real `2n×2n` Jacobian at `w` (layout `Re w₁, Im w₁, Re w₂, …`).
    fn forward_with_jacobian(&self, w: &[Complex64]) -> Result<(Vec<Complex64>, Vec<f64>)> {
        let n = self.dimension();
        let dim = 2 * n;
        let (p, _) = split(w);
        let r = norm(&p);
        if r == 0.0 {
            return Err(Error::Domain("retraction undefined at (z₁, x') = 0".into()));
        }
        let u: Vec<f64> = p.iter().map(|x| x / r).collect();
        let psi = self.spec.eval(&u);
        let value: Vec<Complex64> = w.iter().zip(&psi).map(|(a, b)| a + b).collect();
        let mut jac = vec![0.0; dim * dim];
        for i in 0..dim {
            jac[i * dim + i] = 1.0;
        }
        let vars = n + 1;
        // real index of variable v in the layout of w
        let real_index = |v: usize| if v < 2 { v } else { 2 * (v - 1) };
        let mut dr = vec![0.0; vars * vars];
        for i in 0..vars {
            for k in 0..vars {
                let delta = if i == k { 1.0 } else { 0.0 };
                dr[i * vars + k] = (delta - u[i] * u[k]) / r;
            }
        }
        for (j, grads) in self.gradients.iter().enumerate() {
            let dpsi: Vec<Complex64> = grads.iter().map(|g| g.eval(&u) * self.spec.amplitude).collect();
            for k in 0..vars {
                let d: Complex64 = (0..vars).map(|i| dpsi[i] * dr[i * vars + k]).sum();
                let col = real_index(k);
                jac[(2 * j) * dim + col] += d.re;
                jac[(2 * j + 1) * dim + col] += d.im;
            }
        }
        Ok((value, jac))
    }

    fn cache_key(z: &[Complex64]) -> Vec<i64> {
        z.iter()
            .flat_map(|c| [c.re, c.im])
            .map(|x| (x / CACHE_QUANTUM).round() as i64)
            .collect()
    }

    /// Newton-solves `Ψ(w) = z` starting from `w₀ = z`.
    pub fn invert(&self, z: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_point(z)?;
        if self.trivial {
            return Ok(z.to_vec());
        }
        let key = Self::cache_key(z);
        if let Some(bucket) = self.cache.get(&key) {
            if let Some((_, w)) = bucket.iter().find(|(p, _)| p.as_slice() == z) {
                return Ok(w.clone());
            }
        }
        let w = self.newton_invert(z)?;
        if self.cache.len() >= CACHE_CAPACITY {
            self.cache.clear();
        }
        self.cache.entry(key).or_default().push((z.to_vec(), w.clone()));
        Ok(w)
    }

    fn newton_invert(&self, z: &[Complex64]) -> Result<Vec<Complex64>> {
        let n = self.dimension();
        let scale = 1.0 + z.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let floor = 4.0 * f64::EPSILON * scale;
        let mut w = z.to_vec();
        let mut prev = f64::INFINITY;
        let mut residual = f64::INFINITY;
        for _ in 0..MAX_NEWTON_ITER {
            let (value, jac) = self.forward_with_jacobian(&w)?;
            let defect: Vec<f64> = value
                .iter()
                .zip(z)
                .flat_map(|(a, b)| [a.re - b.re, a.im - b.im])
                .collect();
            residual = norm(&defect);
            if residual <= floor || (residual <= self.newton_tol && residual > 0.5 * prev) {
                return Ok(w);
            }
            prev = residual;
            let rhs: Vec<f64> = defect.iter().map(|d| -d).collect();
            let step = solve_real(&jac, &rhs)?;
            for j in 0..n {
                w[j] += Complex64::new(step[2 * j], step[2 * j + 1]);
            }
        }
        if residual <= self.newton_tol {
            return Ok(w);
        }
        Err(Error::Inversion {
            point: format!("{z:?}"),
            residual,
        })
    }

    /// `φ(z) = z − Ψ⁻¹(z)`.
    pub fn phi_eval(&self, z: &[Complex64]) -> Result<Vec<Complex64>> {
        let w = self.invert(z)?;
        Ok(z.iter().zip(&w).map(|(a, b)| a - b).collect())
    }

    pub fn phi_component(&self, j: usize, z: &[Complex64]) -> Result<Complex64> {
        self.phi_eval(z).map(|p| p[j])
    }

    /// Real Jacobian of `Φ = Ψ⁻¹` at `z` (row-major, `2n×2n`).
    pub fn inverse_jacobian(&self, z: &[Complex64]) -> Result<Vec<f64>> {
        let w = self.invert(z)?;
        let (_, jac) = self.forward_with_jacobian(&w)?;
        let dim = 2 * self.dimension();
        let mut inv = vec![0.0; dim * dim];
        for col in 0..dim {
            let mut e = vec![0.0; dim];
            e[col] = 1.0;
            let x = solve_real(&jac, &e)?;
            for row in 0..dim {
                inv[row * dim + col] = x[row];
            }
        }
        Ok(inv)
    }

    /// Defining equations of `S^n` evaluated at `z − φ(z)`.
    pub fn membership(&self, z: &[Complex64]) -> Result<Vec<f64>> {
        Ok(defining_map(&self.invert(z)?))
    }

    /// `max |R(z − φ(z))|`; vanishes exactly on `S^n_φ`.
    pub fn membership_defect(&self, z: &[Complex64]) -> Result<f64> {
        Ok(self.membership(z)?.iter().map(|v| v.abs()).fold(0.0, f64::max))
    }

    /// Differential of `R∘Φ` at `z` applied to the real tangent vector `v`.
    pub fn defining_differential(&self, z: &[Complex64], v: &[Complex64]) -> Result<Vec<f64>> {
        let n = self.dimension();
        let dim = 2 * n;
        let w = self.invert(z)?;
        let dphi = self.inverse_jacobian(z)?;
        let vr: Vec<f64> = v.iter().flat_map(|c| [c.re, c.im]).collect();
        let dw: Vec<f64> = (0..dim)
            .map(|i| (0..dim).map(|k| dphi[i * dim + k] * vr[k]).sum())
            .collect();
        let mut out = vec![0.0; n];
        out[0] = (0..n)
            .map(|j| 2.0 * (w[j].re * dw[2 * j] + w[j].im * dw[2 * j + 1]))
            .sum();
        for j in 1..n {
            out[j] = dw[2 * j + 1];
        }
        Ok(out)
    }
}
