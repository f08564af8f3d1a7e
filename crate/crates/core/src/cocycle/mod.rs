//! Matrix cocycles over the base systems.
//!
//! A cocycle is generated by its one-step map `x -> A(x) = C(x, 1)`; longer
//! products follow from `C(x, r + s) = C(T^r x, s) C(x, r)`. Expansion
//! functionals are accumulated by multiply-and-renormalise so that they stay
//! finite for orbits far beyond the range of raw products.

mod diagnostics;
mod lyapunov;

pub use diagnostics::*;
pub use lyapunov::*;

use std::f64::consts::TAU;

use rand_distr::{Distribution, StandardNormal};

use crate::dynamics::{turns_to_f64, PhaseSpaceSystem, Point};
use crate::error::{LabError, Result};
use crate::linalg::{normalize, singular_values_2x2, Matrix};
use crate::rng::Stream;

pub const DEFAULT_RENORM_PERIOD: usize = 32;

/// Generators whose condition number exceeds this are rejected.
pub const MAX_CONDITION_NUMBER: f64 = 1e12;

/// Raw products with an entry beyond this are refused.
pub const OVERFLOW_THRESHOLD: f64 = 1e300;

/// Longest raw product returned by [`MatrixCocycle::evaluate`].
pub const MAX_RAW_PRODUCT: i64 = 1_000_000;

const RENORM_BUDGET: f64 = 300.0 * std::f64::consts::LN_2;
const VALIDATION_SAMPLES: u64 = 4096;

/// One Fourier mode of a matrix-valued trigonometric polynomial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigTerm {
    pub frequency: Vec<i64>,
    pub cos: Matrix,
    pub sin: Matrix,
}

/// `A(x) = base + sum_k cos(2 pi <k, x>) C_k + sin(2 pi <k, x>) S_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigFamily {
    pub base: Matrix,
    pub terms: Vec<TrigTerm>,
}

impl TrigFamily {
    fn eval_into(&self, turns: &[u64], out: &mut Matrix) {
        out.as_mut_slice().copy_from_slice(self.base.as_slice());
        for term in &self.terms {
            let phase = term
                .frequency
                .iter()
                .zip(turns)
                .fold(0u64, |acc, (&k, &x)| acc.wrapping_add((k as u64).wrapping_mul(x)));
            let (s, c) = (TAU * turns_to_f64(phase)).sin_cos();
            out.add_scaled(&term.cos, c);
            out.add_scaled(&term.sin, s);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GeneratorKind {
    Constant(Matrix),
    /// Matrix indexed by the symbol at coordinate 0 of a shift point.
    SymbolTable(Vec<Matrix>),
    SmoothTorus(TrigFamily),
    /// `k`-th exterior power of another generator, evaluated pointwise.
    Exterior {
        inner: Box<CocycleGenerator>,
        k: usize,
    },
}

/// The one-step map `x -> A(x)` of a cocycle.
#[derive(Debug, Clone, PartialEq)]
pub struct CocycleGenerator {
    kind: GeneratorKind,
    dim: usize,
    log_norm_bound: f64,
    inverses: Vec<Matrix>,
}

fn check_matrix(m: &Matrix) -> Result<()> {
    let cond = m.condition_number();
    if !(cond <= MAX_CONDITION_NUMBER) {
        return Err(LabError::Invalid(format!("generator matrix has condition number {cond:.3e} > 1e12")));
    }
    Ok(())
}

/// `max(log ||A||, log ||A^{-1}||)`.
fn log_norm_extent(m: &Matrix) -> f64 {
    let sv = m.singular_values();
    sv[0].ln().max(-sv.last().unwrap().ln()).max(0.0)
}

impl CocycleGenerator {
    pub fn constant(m: Matrix) -> Result<Self> {
        check_matrix(&m)?;
        Ok(CocycleGenerator {
            dim: m.dim(),
            log_norm_bound: log_norm_extent(&m),
            inverses: vec![m.inverse()?],
            kind: GeneratorKind::Constant(m),
        })
    }

    pub fn symbol_table(table: Vec<Matrix>) -> Result<Self> {
        let dim = table.first().ok_or_else(|| LabError::Invalid("empty symbol table".into()))?.dim();
        if table.iter().any(|m| m.dim() != dim) {
            return Err(LabError::Invalid("symbol table matrices differ in size".into()));
        }
        for m in &table {
            check_matrix(m)?;
        }
        Ok(CocycleGenerator {
            dim,
            log_norm_bound: table.iter().map(log_norm_extent).fold(0.0, f64::max),
            inverses: table.iter().map(Matrix::inverse).collect::<Result<_>>()?,
            kind: GeneratorKind::SymbolTable(table),
        })
    }

    /// Smooth generator on a `torus_dim`-dimensional torus.
    ///
    /// Invertibility and conditioning are checked on a fixed pseudo-random
    /// sample of the torus. The norm bound combines the triangle-inequality
    /// bound on `||A||` with the sampled maximum of `||A^{-1}||` widened by
    /// 10%.
    pub fn smooth_torus(family: TrigFamily, torus_dim: usize) -> Result<Self> {
        let dim = family.base.dim();
        for t in &family.terms {
            if t.frequency.len() != torus_dim || t.cos.dim() != dim || t.sin.dim() != dim {
                return Err(LabError::Invalid("inconsistent trigonometric term".into()));
            }
        }
        let forward =
            family.base.op_norm() + family.terms.iter().map(|t| t.cos.op_norm() + t.sin.op_norm()).sum::<f64>();
        let mut stream = Stream::from_seed(0).named("generator-validation");
        let mut m = Matrix::zeros(dim);
        let mut inv_max: f64 = 0.0;
        for _ in 0..VALIDATION_SAMPLES {
            let turns: Vec<u64> = (0..torus_dim).map(|_| stream.next_bits()).collect();
            family.eval_into(&turns, &mut m);
            check_matrix(&m)?;
            inv_max = inv_max.max(-m.singular_values().last().unwrap().ln());
        }
        Ok(CocycleGenerator {
            dim,
            log_norm_bound: forward.ln().max(1.1 * inv_max).max(0.0),
            inverses: Vec::new(),
            kind: GeneratorKind::SmoothTorus(family),
        })
    }

    /// Replaces the computed bound on `|log ||A^{+-1}|| |` with a declared one.
    pub fn with_log_norm_bound(mut self, bound: f64) -> Result<Self> {
        if !(bound >= 0.0) || !bound.is_finite() {
            return Err(LabError::Invalid("log_norm_bound must be finite and >= 0".into()));
        }
        self.log_norm_bound = bound;
        Ok(self)
    }

    pub fn identity(dim: usize) -> Self {
        Self::constant(Matrix::identity(dim)).unwrap()
    }

    pub fn kind(&self) -> &GeneratorKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn log_norm_bound(&self) -> f64 {
        self.log_norm_bound
    }

    /// True when every generator matrix has `|det| = 1`.
    pub fn is_unimodular(&self) -> bool {
        match &self.kind {
            GeneratorKind::Constant(m) => (m.det().abs() - 1.0).abs() < 1e-12,
            GeneratorKind::SymbolTable(t) => t.iter().all(|m| (m.det().abs() - 1.0).abs() < 1e-12),
            GeneratorKind::Exterior { inner, .. } => inner.is_unimodular(),
            GeneratorKind::SmoothTorus(_) => false,
        }
    }

    fn check_system(&self, sys: &PhaseSpaceSystem) -> Result<()> {
        match &self.kind {
            GeneratorKind::SymbolTable(t) if sys.alphabet_size() != Some(t.len()) => {
                Err(LabError::TypeMismatch("symbol table size must equal the shift alphabet".into()))
            }
            GeneratorKind::SmoothTorus(f)
                if f.terms.first().map(|t| t.frequency.len()).or(sys.torus_dim()) != sys.torus_dim() =>
            {
                Err(LabError::TypeMismatch("smooth generator needs a matching torus".into()))
            }
            GeneratorKind::Exterior { inner, .. } => inner.check_system(sys),
            _ => Ok(()),
        }
    }

    /// `A(x)`, borrowed when it is stored and written to `scratch` otherwise.
    #[inline]
    pub fn matrix_at<'a>(&'a self, sys: &PhaseSpaceSystem, p: &Point, scratch: &'a mut Matrix) -> &'a Matrix {
        match (&self.kind, p) {
            (GeneratorKind::Constant(m), _) => m,
            (GeneratorKind::SymbolTable(t), Point::Symbolic(s)) => &t[sys.symbol(s, 0)],
            (GeneratorKind::SmoothTorus(f), Point::Torus(t)) => {
                f.eval_into(t.turns(), scratch);
                scratch
            }
            (GeneratorKind::Exterior { inner, k }, _) => {
                let mut tmp = Matrix::zeros(inner.dim);
                let a = inner.matrix_at(sys, p, &mut tmp).compound(*k);
                *scratch = a;
                scratch
            }
            _ => panic!("generator evaluated on an incompatible point"),
        }
    }

    /// `A(x)^{-1}`.
    pub fn inverse_at<'a>(&'a self, sys: &PhaseSpaceSystem, p: &Point, scratch: &'a mut Matrix) -> &'a Matrix {
        match (&self.kind, p) {
            (GeneratorKind::Constant(_), _) => &self.inverses[0],
            (GeneratorKind::SymbolTable(_), Point::Symbolic(s)) => &self.inverses[sys.symbol(s, 0)],
            _ => {
                let mut tmp = Matrix::zeros(self.dim);
                let inv = self.matrix_at(sys, p, &mut tmp).inverse().expect("generator validated invertible");
                *scratch = inv;
                scratch
            }
        }
    }

    fn exterior(&self, k: usize) -> Result<CocycleGenerator> {
        let g = match &self.kind {
            GeneratorKind::Constant(m) => CocycleGenerator::constant(m.compound(k))?,
            GeneratorKind::SymbolTable(t) => CocycleGenerator::symbol_table(t.iter().map(|m| m.compound(k)).collect())?,
            _ => {
                let dim = crate::linalg::k_subsets(self.dim, k).len();
                CocycleGenerator {
                    kind: GeneratorKind::Exterior { inner: Box::new(self.clone()), k },
                    dim,
                    log_norm_bound: k as f64 * self.log_norm_bound,
                    inverses: Vec::new(),
                }
            }
        };
        Ok(g)
    }
}

/// The companion cocycle `D` over `U`.
#[derive(Debug, Clone, PartialEq)]
pub enum CompanionCocycle {
    /// `D(x, 1) = I`.
    IdentityTransport,
    Custom(CocycleGenerator),
}

impl CompanionCocycle {
    /// `D(x, 1) v`.
    pub fn transport(&self, sys: &PhaseSpaceSystem, x: &Point, v: &[f64]) -> Vec<f64> {
        match self {
            CompanionCocycle::IdentityTransport => v.to_vec(),
            CompanionCocycle::Custom(g) => {
                let mut scratch = Matrix::zeros(g.dim);
                let mut out = vec![0.0; v.len()];
                g.matrix_at(sys, x, &mut scratch).apply(v, &mut out);
                out
            }
        }
    }
}

/// Unit vector drawn from the orthogonally invariant law on the sphere,
/// i.e. the projective measure `nu` on lines.
pub fn sample_direction(dim: usize, stream: &mut Stream) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(stream)).collect();
        if normalize(&mut v) > 1e-300 {
            return v;
        }
    }
}

/// Sampler for `nu` on the projective space of `R^m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProjectiveSampler {
    pub dim: usize,
}

impl ProjectiveSampler {
    pub fn sample(&self, stream: &mut Stream) -> Vec<f64> {
        sample_direction(self.dim, stream)
    }
}

/// Products are rescaled once their size passes `2^256`.
const RESCALE_EXPONENT: i32 = 256;

/// Exact power of two for `|e| < 1022`.
#[inline]
fn pow2(e: i32) -> f64 {
    f64::from_bits(((1023 + e) as u64) << 52)
}

#[inline]
fn binary_exponent(x: f64) -> i32 {
    x.log2().floor() as i32
}

/// Tracks `log ||C(x, N) v|| - log ||v||`.
///
/// Every `period` steps the vector is checked and, when its norm has left
/// `[2^-256, 2^256]`, rescaled by a power of two. Power-of-two scaling is
/// exact, so the result does not depend on the period.
#[derive(Debug, Clone)]
pub struct VectorTracker {
    v: Vec<f64>,
    tmp: Vec<f64>,
    initial_norm: f64,
    log2_scale: i64,
    steps: u64,
    period: u64,
}

impl VectorTracker {
    pub fn new(v: &[f64], period: usize) -> Result<Self> {
        let n = crate::linalg::norm(v);
        if !(n > 0.0) || !n.is_finite() {
            return Err(LabError::Domain("expansion of the zero vector is undefined".into()));
        }
        let s = pow2(-binary_exponent(n));
        let v: Vec<f64> = v.iter().map(|c| c * s).collect();
        Ok(VectorTracker {
            tmp: vec![0.0; v.len()],
            initial_norm: crate::linalg::norm(&v),
            v,
            log2_scale: 0,
            steps: 0,
            period: period as u64,
        })
    }

    #[inline]
    pub fn push(&mut self, a: &Matrix) {
        a.apply(&self.v, &mut self.tmp);
        std::mem::swap(&mut self.v, &mut self.tmp);
        self.steps += 1;
        if self.steps.is_multiple_of(self.period) {
            let e = binary_exponent(crate::linalg::norm(&self.v));
            if e.abs() > RESCALE_EXPONENT {
                let s = pow2(-e);
                self.v.iter_mut().for_each(|c| *c *= s);
                self.log2_scale += e as i64;
            }
        }
    }

    #[inline]
    pub fn sigma(&self) -> f64 {
        self.log2_scale as f64 * std::f64::consts::LN_2 + (crate::linalg::norm(&self.v) / self.initial_norm).ln()
    }

    /// Unit vector along `C(x, N) v`.
    pub fn direction(&self) -> Vec<f64> {
        let mut d = self.v.clone();
        normalize(&mut d);
        d
    }
}

/// Tracks `log ||C(x, N)||` on a product rescaled by powers of two.
#[derive(Debug, Clone)]
pub struct NormTracker {
    p: Matrix,
    tmp: Matrix,
    log2_scale: i64,
    steps: u64,
    period: u64,
}

impl NormTracker {
    pub fn new(dim: usize, period: usize) -> Self {
        NormTracker {
            p: Matrix::identity(dim),
            tmp: Matrix::zeros(dim),
            log2_scale: 0,
            steps: 0,
            period: period as u64,
        }
    }

    #[inline]
    pub fn push(&mut self, a: &Matrix) {
        a.mul_into(&self.p, &mut self.tmp);
        std::mem::swap(&mut self.p, &mut self.tmp);
        self.steps += 1;
        if self.steps.is_multiple_of(self.period) {
            let e = binary_exponent(self.p.frobenius_norm());
            if e.abs() > RESCALE_EXPONENT {
                self.p.scale(pow2(-e));
                self.log2_scale += e as i64;
            }
        }
    }

    #[inline]
    pub fn sigma(&self) -> f64 {
        let top = if self.p.dim() == 2 { singular_values_2x2(self.p.as_slice()).0 } else { self.p.op_norm() };
        self.log2_scale as f64 * std::f64::consts::LN_2 + top.ln()
    }
}

/// An `m`-dimensional cocycle over an invertible base.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixCocycle {
    base: PhaseSpaceSystem,
    generator: CocycleGenerator,
    renorm_period: usize,
}

impl MatrixCocycle {
    pub fn new(base: PhaseSpaceSystem, generator: CocycleGenerator) -> Result<Self> {
        Self::with_renorm_period(base, generator, DEFAULT_RENORM_PERIOD)
    }

    /// Requires `renorm_period * log_norm_bound <= 300 ln 2`, which keeps
    /// every unnormalised stretch of a product inside double range.
    pub fn with_renorm_period(
        base: PhaseSpaceSystem,
        generator: CocycleGenerator,
        renorm_period: usize,
    ) -> Result<Self> {
        generator.check_system(&base)?;
        if renorm_period == 0 {
            return Err(LabError::Invalid("renorm_period must be positive".into()));
        }
        if renorm_period as f64 * generator.log_norm_bound > RENORM_BUDGET {
            return Err(LabError::Invalid(format!(
                "renorm_period {renorm_period} times log_norm_bound {:.4} exceeds 300 ln 2",
                generator.log_norm_bound
            )));
        }
        Ok(MatrixCocycle { base, generator, renorm_period })
    }

    pub fn base(&self) -> &PhaseSpaceSystem {
        &self.base
    }

    pub fn generator(&self) -> &CocycleGenerator {
        &self.generator
    }

    pub fn dim(&self) -> usize {
        self.generator.dim
    }

    pub fn renorm_period(&self) -> usize {
        self.renorm_period
    }

    /// Same cocycle with another rescaling period.
    pub fn renormalized_every(&self, period: usize) -> Result<Self> {
        Self::with_renorm_period(self.base.clone(), self.generator.clone(), period)
    }

    /// Feeds `A(T^n x)` for `n = 0..steps` to `f`, returning `T^steps x`.
    #[inline]
    pub fn walk(&self, x: &Point, steps: u64, mut f: impl FnMut(&Matrix)) -> Point {
        let mut scratch = Matrix::zeros(self.dim());
        let mut p = *x;
        for _ in 0..steps {
            f(self.generator.matrix_at(&self.base, &p, &mut scratch));
            p = self.base.step(&p);
        }
        p
    }

    /// Feeds `A(T^{-n} x)^{-1}` for `n = 1..=steps` to `f`, returning `T^{-steps} x`.
    pub fn walk_back(&self, x: &Point, steps: u64, mut f: impl FnMut(&Matrix)) -> Point {
        let mut scratch = Matrix::zeros(self.dim());
        let mut p = *x;
        for _ in 0..steps {
            p = self.base.step_back(&p);
            f(self.generator.inverse_at(&self.base, &p, &mut scratch));
        }
        p
    }

    fn walk_signed(&self, x: &Point, n: i64, f: impl FnMut(&Matrix)) -> Point {
        if n >= 0 {
            self.walk(x, n as u64, f)
        } else {
            self.walk_back(x, n.unsigned_abs(), f)
        }
    }

    /// Raw product `C(x, n)`: `A(T^{n-1} x) ... A(x)` for `n > 0`, the
    /// identity for `n = 0` and `C(T^n x, -n)^{-1}` for `n < 0`.
    pub fn evaluate(&self, x: &Point, n: i64) -> Result<Matrix> {
        self.base.check_point(x)?;
        if n.abs() > MAX_RAW_PRODUCT {
            return Err(LabError::Range(format!(
                "raw products are limited to |N| <= 10^6; use the sigma functionals for N = {n}"
            )));
        }
        let mut prod = Matrix::identity(self.dim());
        let mut tmp = Matrix::zeros(self.dim());
        let mut overflow = false;
        self.walk_signed(x, n, |a| {
            if overflow {
                return;
            }
            a.mul_into(&prod, &mut tmp);
            std::mem::swap(&mut prod, &mut tmp);
            overflow = !(prod.max_abs() <= OVERFLOW_THRESHOLD);
        });
        if overflow {
            return Err(LabError::Overflow("product entries exceed 1e300; use sigma_vec / sigma_norm instead".into()));
        }
        Ok(prod)
    }

    /// `sigma(x, v, N) = log ||C(x, N) v|| / ||v||`.
    pub fn sigma_vec(&self, x: &Point, v: &[f64], n: i64) -> Result<f64> {
        self.base.check_point(x)?;
        self.check_vector(v)?;
        let mut t = VectorTracker::new(v, self.renorm_period)?;
        self.walk_signed(x, n, |a| t.push(a));
        Ok(t.sigma())
    }

    /// `sigma(x, N) = log ||C(x, N)||`.
    pub fn sigma_norm(&self, x: &Point, n: i64) -> Result<f64> {
        self.base.check_point(x)?;
        let mut t = NormTracker::new(self.dim(), self.renorm_period);
        self.walk_signed(x, n, |a| t.push(a));
        Ok(t.sigma())
    }

    /// `(sigma(x, v, N), T^N x, unit direction of C(x, N) v)` in one pass.
    pub fn sigma_vec_with_endpoint(&self, x: &Point, v: &[f64], n: u64) -> Result<(f64, Point, Vec<f64>)> {
        self.check_vector(v)?;
        let mut t = VectorTracker::new(v, self.renorm_period)?;
        let end = self.walk(x, n, |a| t.push(a));
        Ok((t.sigma(), end, t.direction()))
    }

    /// `(sigma(x, N), T^N x)` in one pass.
    pub fn sigma_norm_with_endpoint(&self, x: &Point, n: u64) -> (f64, Point) {
        let mut t = NormTracker::new(self.dim(), self.renorm_period);
        let end = self.walk(x, n, |a| t.push(a));
        (t.sigma(), end)
    }

    pub(crate) fn check_vector(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.dim() {
            return Err(LabError::TypeMismatch(format!(
                "vector of length {} for a {}-dimensional cocycle",
                v.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// The cocycle `Lambda^k C` acting on `k`-vectors in the lexicographic
    /// wedge basis, which is declared orthonormal.
    pub fn exterior_power(&self, k: usize) -> Result<MatrixCocycle> {
        if k == 0 || k > self.dim() {
            return Err(LabError::Invalid(format!("exterior power {k} of a {}-dimensional cocycle", self.dim())));
        }
        let generator = self.generator.exterior(k)?;
        let period = if generator.log_norm_bound > 0.0 {
            let cap = (RENORM_BUDGET / generator.log_norm_bound).floor().max(1.0) as usize;
            self.renorm_period.min(cap)
        } else {
            self.renorm_period
        };
        Self::with_renorm_period(self.base.clone(), generator, period)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::PhaseSpaceSystem;
    use crate::linalg::k_subsets;
    use approx::assert_abs_diff_eq;

    fn diag_cocycle() -> MatrixCocycle {
        MatrixCocycle::new(
            PhaseSpaceSystem::cat_map(),
            CocycleGenerator::constant(Matrix::diagonal(&[2.0, 0.5])).unwrap(),
        )
        .unwrap()
    }

    pub(crate) fn shear_pair() -> MatrixCocycle {
        let a = Matrix::from_rows(&[&[1.0, 1.0], &[0.0, 1.0]]).unwrap();
        let b = Matrix::from_rows(&[&[1.0, 0.0], &[1.0, 1.0]]).unwrap();
        MatrixCocycle::new(PhaseSpaceSystem::bernoulli(2), CocycleGenerator::symbol_table(vec![a, b]).unwrap()).unwrap()
    }

    pub(crate) fn smooth_cat() -> MatrixCocycle {
        let base = Matrix::from_rows(&[&[2.0, 1.0], &[1.0, 1.0]]).unwrap();
        let bump = Matrix::from_rows(&[&[0.3, 0.0], &[0.0, 0.0]]).unwrap();
        let family =
            TrigFamily { base, terms: vec![TrigTerm { frequency: vec![1, 0], cos: bump, sin: Matrix::zeros(2) }] };
        MatrixCocycle::new(PhaseSpaceSystem::cat_map(), CocycleGenerator::smooth_torus(family, 2).unwrap()).unwrap()
    }

    fn some_point(coc: &MatrixCocycle, seed: u64) -> Point {
        coc.base().sample_measure(&mut Stream::from_seed(seed))
    }

    #[test]
    fn zero_steps_is_identity() {
        let coc = shear_pair();
        let x = some_point(&coc, 1);
        assert_eq!(coc.evaluate(&x, 0).unwrap(), Matrix::identity(2));
    }

    #[test]
    fn diagonal_power() {
        let coc = diag_cocycle();
        let x = some_point(&coc, 1);
        assert_eq!(coc.evaluate(&x, 3).unwrap(), Matrix::diagonal(&[8.0, 0.125]));
        assert_eq!(coc.evaluate(&x, -3).unwrap(), Matrix::diagonal(&[0.125, 8.0]));
        assert_abs_diff_eq!(coc.sigma_vec(&x, &[1.0, 0.0], 5).unwrap(), 5.0 * 2f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(coc.sigma_norm(&x, 5).unwrap(), 5.0 * 2f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn identity_generator_has_zero_expansion() {
        let coc = MatrixCocycle::new(PhaseSpaceSystem::bernoulli(2), CocycleGenerator::identity(3)).unwrap();
        let x = some_point(&coc, 4);
        for n in [1, 10, 1000] {
            assert!(coc.sigma_vec(&x, &[1.0, 2.0, 3.0], n).unwrap().abs() < 1e-15);
            assert!(coc.sigma_norm(&x, n).unwrap().abs() < 1e-15);
        }
    }

    #[test]
    fn cocycle_identity_on_random_triples() {
        for coc in [shear_pair(), smooth_cat()] {
            let mut s = Stream::from_seed(9);
            for _ in 0..200 {
                let x = coc.base().sample_measure(&mut s);
                let r = (s.next_bits() % 21) as i64;
                let q = (s.next_bits() % 21) as i64;
                let whole = coc.evaluate(&x, r + q).unwrap();
                let split =
                    coc.evaluate(&coc.base().apply_map(&x, r).unwrap(), q).unwrap().mul(&coc.evaluate(&x, r).unwrap());
                let mut diff = whole.clone();
                diff.add_scaled(&split, -1.0);
                assert!(diff.op_norm() / whole.op_norm() <= 1e-9);
                // C(x, N)^{-1} = C(T^N x, -N), against the 2x2 adjugate.
                let c = coc.evaluate(&x, r).unwrap();
                let mut det = 1.0;
                coc.walk(&x, r as u64, |a| det *= a.det());
                let adj = Matrix::from_rows(&[
                    &[c.get(1, 1) / det, -c.get(0, 1) / det],
                    &[-c.get(1, 0) / det, c.get(0, 0) / det],
                ])
                .unwrap();
                let mut err = coc.evaluate(&coc.base().apply_map(&x, r).unwrap(), -r).unwrap();
                err.add_scaled(&adj, -1.0);
                assert!(err.op_norm() <= 1e-9 * adj.op_norm());
            }
        }
    }

    #[test]
    fn overflow_is_reported() {
        let coc = MatrixCocycle::with_renorm_period(
            PhaseSpaceSystem::cat_map(),
            CocycleGenerator::constant(Matrix::diagonal(&[1e3, 1e-3])).unwrap(),
            1,
        )
        .unwrap();
        let x = some_point(&coc, 1);
        assert!(matches!(coc.evaluate(&x, 200), Err(LabError::Overflow(_))));
        assert!(matches!(coc.evaluate(&x, 2_000_000), Err(LabError::Range(_))));
        assert!(coc.sigma_norm(&x, 200).unwrap().is_finite());
    }

    #[test]
    fn sigma_vec_matches_raw_products() {
        for coc in [shear_pair(), smooth_cat()] {
            let mut s = Stream::from_seed(21);
            for n in [1i64, 7, 50, 200] {
                let x = coc.base().sample_measure(&mut s);
                let v = sample_direction(2, &mut s);
                let mut out = [0.0; 2];
                coc.evaluate(&x, n).unwrap().apply(&v, &mut out);
                let raw = crate::linalg::norm(&out).ln();
                assert!((coc.sigma_vec(&x, &v, n).unwrap() - raw).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn sigma_norm_dominates_sigma_vec() {
        let coc = shear_pair();
        let mut s = Stream::from_seed(3);
        let x = coc.base().sample_measure(&mut s);
        for n in [1i64, 5, 40, 300] {
            let top = coc.sigma_norm(&x, n).unwrap();
            for _ in 0..100 {
                let v = sample_direction(2, &mut s);
                assert!(coc.sigma_vec(&x, &v, n).unwrap() <= top + 1e-12);
            }
        }
    }

    #[test]
    fn zero_vector_is_a_domain_error() {
        let coc = shear_pair();
        let x = some_point(&coc, 1);
        assert!(matches!(coc.sigma_vec(&x, &[0.0, 0.0], 3), Err(LabError::Domain(_))));
    }

    #[test]
    fn scale_invariance() {
        let coc = smooth_cat();
        let x = some_point(&coc, 6);
        let v = [0.3, -0.7];
        let base = coc.sigma_vec(&x, &v, 500).unwrap();
        for c in [4.0, -0.125, 1024.0] {
            let w = [c * v[0], c * v[1]];
            assert_eq!(coc.sigma_vec(&x, &w, 500).unwrap(), base);
        }
        for c in [3.7, -1e-5] {
            let w = [c * v[0], c * v[1]];
            assert!((coc.sigma_vec(&x, &w, 500).unwrap() - base).abs() <= 1e-12 * base.abs().max(1.0));
        }
    }

    #[test]
    fn renormalization_is_transparent() {
        for coc in [shear_pair(), smooth_cat()] {
            let every = coc.renormalized_every(1).unwrap();
            let rarely = coc.renormalized_every(64).unwrap();
            let mut s = Stream::from_seed(8);
            let x = coc.base().sample_measure(&mut s);
            let v = sample_direction(2, &mut s);
            for n in [10i64, 1000, 10_000] {
                let a = every.sigma_vec(&x, &v, n).unwrap();
                let b = rarely.sigma_vec(&x, &v, n).unwrap();
                assert!((a - b).abs() <= 1e-8, "{a} vs {b}");
            }
        }
        // Budget rule: period * bound <= 300 ln 2.
        assert!(shear_pair().renormalized_every(64).is_ok());
        assert!(smooth_cat().renormalized_every(10_000).is_err());
    }

    #[test]
    fn orbit_additivity_of_sigma() {
        let coc = shear_pair();
        let mut s = Stream::from_seed(12);
        let x = coc.base().sample_measure(&mut s);
        let v = sample_direction(2, &mut s);
        let (a, mid, dir) = coc.sigma_vec_with_endpoint(&x, &v, 3000).unwrap();
        let b = coc.sigma_vec(&mid, &dir, 4000).unwrap();
        assert!((a + b - coc.sigma_vec(&x, &v, 7000).unwrap()).abs() <= 1e-8);
        let (na, nmid) = coc.sigma_norm_with_endpoint(&x, 3000);
        let nb = coc.sigma_norm(&nmid, 4000).unwrap();
        assert!(coc.sigma_norm(&x, 7000).unwrap() <= na + nb + 1e-8);
    }

    #[test]
    fn ill_conditioned_generators_are_rejected() {
        assert!(CocycleGenerator::constant(Matrix::diagonal(&[1e7, 1e-7])).is_err());
        assert!(CocycleGenerator::constant(Matrix::from_rows(&[&[1.0, 2.0], &[2.0, 4.0]]).unwrap()).is_err());
        let bad = TrigFamily {
            base: Matrix::diagonal(&[1.0, 0.0]),
            terms: vec![TrigTerm { frequency: vec![1, 0], cos: Matrix::diagonal(&[0.5, 0.0]), sin: Matrix::zeros(2) }],
        };
        assert!(CocycleGenerator::smooth_torus(bad, 2).is_err());
        let table = CocycleGenerator::symbol_table(vec![Matrix::identity(2); 3]).unwrap();
        assert!(matches!(MatrixCocycle::new(PhaseSpaceSystem::bernoulli(2), table), Err(LabError::TypeMismatch(_))));
    }

    /// Leibniz expansion, independent of the LU determinant used by `compound`.
    fn leibniz_det(m: &[Vec<f64>]) -> f64 {
        fn perms(n: usize) -> Vec<Vec<usize>> {
            if n == 0 {
                return vec![vec![]];
            }
            let mut out = Vec::new();
            for p in perms(n - 1) {
                for i in 0..=p.len() {
                    let mut q = p.clone();
                    q.insert(i, n - 1);
                    out.push(q);
                }
            }
            out
        }
        let n = m.len();
        perms(n)
            .into_iter()
            .map(|p| {
                let inversions =
                    (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).filter(|&(i, j)| p[i] > p[j]).count();
                let sign = if inversions % 2 == 0 { 1.0 } else { -1.0 };
                sign * (0..n).map(|i| m[i][p[i]]).product::<f64>()
            })
            .sum()
    }

    #[test]
    fn exterior_square_entries_are_minors() {
        let mut s = Stream::from_seed(31);
        let data: Vec<f64> = (0..9).map(|_| s.uniform() * 4.0 - 2.0).collect();
        let m = Matrix::from_row_major(3, data).unwrap();
        let coc =
            MatrixCocycle::new(PhaseSpaceSystem::cat_map(), CocycleGenerator::constant(m.clone()).unwrap()).unwrap();
        let ext = coc.exterior_power(2).unwrap();
        let GeneratorKind::Constant(w) = ext.generator().kind() else { panic!() };
        let subsets = k_subsets(3, 2);
        for (r, rows) in subsets.iter().enumerate() {
            for (c, cols) in subsets.iter().enumerate() {
                let minor: Vec<Vec<f64>> = rows.iter().map(|&i| cols.iter().map(|&j| m.get(i, j)).collect()).collect();
                assert_abs_diff_eq!(w.get(r, c), leibniz_det(&minor), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn top_exterior_power_is_determinant() {
        let coc = diag_cocycle();
        let ext = coc.exterior_power(2).unwrap();
        assert_eq!(ext.dim(), 1);
        let x = some_point(&coc, 2);
        assert_abs_diff_eq!(ext.evaluate(&x, 1).unwrap().get(0, 0), 1.0, epsilon = 1e-15);
        let shear_top = shear_pair().exterior_power(2).unwrap();
        let y = some_point(&shear_top, 2);
        for n in [1i64, 100, 5000] {
            assert!(shear_top.sigma_vec(&y, &[1.0], n).unwrap().abs() < 1e-12);
        }
        // Smooth generator: sigma on the top power is the sum of log |det|.
        let smooth = smooth_cat();
        let top = smooth.exterior_power(2).unwrap();
        let z = some_point(&smooth, 3);
        let mut expected = 0.0;
        smooth.walk(&z, 500, |a| expected += a.det().abs().ln());
        assert!((top.sigma_vec(&z, &[1.0], 500).unwrap() - expected).abs() <= 1e-8);
        assert!(smooth.exterior_power(3).is_err());
    }
}
