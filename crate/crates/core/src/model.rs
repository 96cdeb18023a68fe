//! Model configuration and the assumption validators.
//!
//! Validators sample the relevant inequalities; a certificate records whether
//! it was obtained in closed form or by sampling over a finite window.

use std::fmt;
use std::sync::Arc;

use crate::error::{invalid, Result};
use crate::fields::ScalarField;

/// Default half-width of the sampling window for the noise profile.
pub const DEFAULT_PROFILE_WINDOW: f64 = 1e3;
/// Default upper end of the sampling window for source terms.
pub const DEFAULT_S_MAX: f64 = 1e6;

const LIPSCHITZ_BLOWUP: f64 = 1e8;
const SAMPLE_TOL: f64 = 1e-12;

/// A user-supplied scalar function.
#[derive(Clone)]
pub struct ScalarFn(Arc<dyn Fn(f64) -> f64 + Send + Sync>);

impl ScalarFn {
    pub fn new(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self(Arc::new(f))
    }

    pub fn call(&self, x: f64) -> f64 {
        (self.0)(x)
    }
}

impl fmt::Debug for ScalarFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ScalarFn(..)")
    }
}

/// Reaction term `g`.
#[derive(Debug, Clone)]
pub enum SourceSpec {
    /// `g(s) = mu s (1 - s)`
    Logistic {
        mu: f64,
    },
    /// `g(s) = sum c_i s^i`; the empty polynomial is `g = 0`.
    Polynomial {
        coeffs: Vec<f64>,
    },
    Custom(ScalarFn),
}

impl SourceSpec {
    pub fn zero() -> Self {
        SourceSpec::Polynomial { coeffs: Vec::new() }
    }

    pub fn logistic(mu: f64) -> Self {
        SourceSpec::Logistic { mu }
    }

    pub fn eval(&self, s: f64) -> f64 {
        match self {
            SourceSpec::Logistic { mu } => mu * s * (1.0 - s),
            SourceSpec::Polynomial { coeffs } => coeffs.iter().rev().fold(0.0, |acc, c| acc * s + c),
            SourceSpec::Custom(f) => f.call(s),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            SourceSpec::Logistic { mu } => *mu == 0.0,
            SourceSpec::Polynomial { coeffs } => coeffs.iter().all(|c| *c == 0.0),
            SourceSpec::Custom(_) => false,
        }
    }
}

/// Pointwise profile `h` of the linear-growth noise `sigma_i(z) = kappa_i h(z)`.
#[derive(Debug, Clone)]
pub enum Profile {
    /// `h(z) = z`
    Linear,
    /// `h(z) = z / (1 + |z|)`
    Saturating,
    /// `h(z) = tanh z`
    Tanh,
    /// `h(z) = slope z + offset`
    Affine {
        slope: f64,
        offset: f64,
    },
    Custom(ScalarFn),
}

impl Profile {
    pub fn eval(&self, z: f64) -> f64 {
        match self {
            Profile::Linear => z,
            Profile::Saturating => z / (1.0 + z.abs()),
            Profile::Tanh => z.tanh(),
            Profile::Affine { slope, offset } => slope * z + offset,
            Profile::Custom(f) => f.call(z),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LinearNoiseSpec {
    pub kappas: Vec<f64>,
    pub profile: Profile,
}

impl LinearNoiseSpec {
    pub fn new(kappas: Vec<f64>, profile: Profile) -> Self {
        Self { kappas, profile }
    }

    pub fn kappa_l2(&self) -> f64 {
        self.kappas.iter().map(|k| k * k).sum::<f64>().sqrt()
    }
}

/// Norm-nonlinear noise `b_i |u|_q^r u`.
#[derive(Debug, Clone)]
pub struct NonlinearNoiseSpec {
    pub bs: Vec<f64>,
    pub q: f64,
    pub r: f64,
}

impl NonlinearNoiseSpec {
    pub fn new(bs: Vec<f64>, q: f64, r: f64) -> Self {
        Self { bs, q, r }
    }

    pub fn b_sum_sq(&self) -> f64 {
        self.bs.iter().map(|b| b * b).sum()
    }
}

/// A failed assumption, naming the inequality and, where sampling found it,
/// the witnessing argument.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub condition: String,
    pub detail: String,
    pub witness: Option<f64>,
}

impl Violation {
    fn new(condition: &str, detail: impl Into<String>, witness: Option<f64>) -> Self {
        Self { condition: condition.to_string(), detail: detail.into(), witness }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.condition, self.detail)?;
        if let Some(w) = self.witness {
            write!(f, " (at {w:e})")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CertMethod {
    Analytic,
    Sampled,
}

/// Linear-growth noise that passed the Lipschitz/growth check.
#[derive(Debug, Clone)]
pub struct LinearNoise {
    spec: LinearNoiseSpec,
    lipschitz: f64,
    k: f64,
}

impl LinearNoise {
    pub fn spec(&self) -> &LinearNoiseSpec {
        &self.spec
    }

    /// Sampled Lipschitz constant of the profile.
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// `K = L_h |kappa|_2`.
    pub fn k(&self) -> f64 {
        self.k
    }

    /// `|sigma(z)|_{l2}`.
    pub fn l2_at(&self, z: f64) -> f64 {
        self.spec.kappa_l2() * self.spec.profile.eval(z).abs()
    }
}

fn profile_samples(window: f64) -> Vec<f64> {
    let mut zs = Vec::new();
    let n = 200_000;
    for i in 0..=n {
        zs.push(-window + 2.0 * window * i as f64 / n as f64);
    }
    // dense geometric layers around the origin
    for e in 0..=200 {
        let s = 10f64.powf(-20.0 + e as f64 * 0.1);
        if s < window {
            zs.push(s);
            zs.push(-s);
        }
    }
    zs.push(0.0);
    zs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    zs.dedup();
    zs
}

/// Checks `sigma(0) = 0`, the `l2` Lipschitz bound and the linear growth bound
/// by sampling `h` on `[-window, window]`; returns the certified noise with `K`.
pub fn validate_h1(spec: &LinearNoiseSpec, window: f64) -> std::result::Result<LinearNoise, Violation> {
    if spec.kappas.iter().any(|k| !k.is_finite()) {
        return Err(Violation::new("sum kappa_i^2 < inf", "non-finite noise weight", None));
    }
    let h0 = spec.profile.eval(0.0);
    if h0 != 0.0 {
        return Err(Violation::new("sigma(0) = 0", format!("h(0) = {h0}"), Some(0.0)));
    }
    let zs = profile_samples(window);
    let hs: Vec<f64> = zs.iter().map(|&z| spec.profile.eval(z)).collect();
    let mut lip = 0.0f64;
    for i in 1..zs.len() {
        let ratio = (hs[i] - hs[i - 1]).abs() / (zs[i] - zs[i - 1]);
        if !ratio.is_finite() || ratio > LIPSCHITZ_BLOWUP {
            return Err(Violation::new(
                "|sigma(z1) - sigma(z2)| <= K |z1 - z2|",
                "difference quotient of h unbounded on the window",
                Some(zs[i]),
            ));
        }
        lip = lip.max(ratio);
    }
    let k = lip * spec.kappa_l2();
    let kl2 = spec.kappa_l2();
    for (&z, &h) in zs.iter().zip(&hs) {
        if kl2 * h.abs() > k * (z.abs() + 1.0) * (1.0 + SAMPLE_TOL) {
            return Err(Violation::new("|sigma(z)| <= K (|z| + 1)", "growth bound fails", Some(z)));
        }
    }
    Ok(LinearNoise { spec: spec.clone(), lipschitz: lip, k })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct H2Certificate {
    pub c1: f64,
    pub mu_tilde: f64,
    pub method: CertMethod,
}

fn source_samples(s_max: f64) -> Vec<f64> {
    let mut ss = vec![0.0];
    let n = 4000;
    let lo: f64 = 1e-6;
    for i in 0..n {
        ss.push(lo * (s_max / lo).powf(i as f64 / (n - 1) as f64));
    }
    let dense = s_max.min(100.0);
    for i in 1..=2000 {
        ss.push(dense * i as f64 / 2000.0);
    }
    ss.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ss.dedup();
    ss
}

/// Certifies `g(0) >= 0` and `g(s) <= c1 - mu_tilde s^2` on `[0, s_max]`.
///
/// With `c1 = None` the smallest admissible `c1` is computed: in closed form
/// `mu^2 / (4 (mu - mu_tilde))` for the logistic source, otherwise as the
/// sampled maximum of `g(s) + mu_tilde s^2`, which must be attained inside
/// the window.
pub fn validate_h2(
    source: &SourceSpec,
    mu_tilde: f64,
    c1: Option<f64>,
    s_max: f64,
) -> std::result::Result<H2Certificate, Violation> {
    let g0 = source.eval(0.0);
    if !(g0 >= 0.0) {
        return Err(Violation::new("g(0) >= 0", format!("g(0) = {g0}"), Some(0.0)));
    }
    if !(mu_tilde > 0.0) {
        return Err(Violation::new("mu > 0", format!("requested mu = {mu_tilde}"), None));
    }
    let ss = source_samples(s_max);
    if let Some(c1) = c1 {
        for &s in &ss {
            let lhs = source.eval(s);
            let rhs = c1 - mu_tilde * s * s;
            if !(lhs <= rhs + SAMPLE_TOL * (1.0 + c1.abs() + mu_tilde * s * s)) {
                return Err(Violation::new("g(s) <= c1 - mu s^2", format!("g = {lhs:e} exceeds {rhs:e}"), Some(s)));
            }
        }
        return Ok(H2Certificate { c1, mu_tilde, method: CertMethod::Sampled });
    }

    if let SourceSpec::Logistic { mu } = source {
        let eps = mu - mu_tilde;
        if eps <= 0.0 {
            return Err(Violation::new(
                "g(s) <= c1 - mu s^2",
                format!("logistic rate {mu} cannot dominate mu = {mu_tilde}"),
                Some(s_max),
            ));
        }
        return Ok(H2Certificate { c1: mu * mu / (4.0 * eps), mu_tilde, method: CertMethod::Analytic });
    }

    let (mut best, mut arg) = (f64::NEG_INFINITY, 0usize);
    for (i, &s) in ss.iter().enumerate() {
        let h = source.eval(s) + mu_tilde * s * s;
        if !h.is_finite() {
            return Err(Violation::new("g(s) <= c1 - mu s^2", "g not finite", Some(s)));
        }
        if h > best {
            best = h;
            arg = i;
        }
    }
    if arg == ss.len() - 1 {
        return Err(Violation::new(
            "g(s) <= c1 - mu s^2",
            "g(s) + mu s^2 still increasing at the end of the window",
            Some(ss[arg]),
        ));
    }
    Ok(H2Certificate { c1: best.max(0.0), mu_tilde, method: CertMethod::Sampled })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct A2Certificate {
    pub c2: f64,
    pub mu_prime: f64,
    pub n: f64,
}

/// Checks `g(0) >= 0` and `|g(s)| <= c2 + mu' s^n` on sampled `[0, s_max]`.
pub fn validate_a2(
    source: &SourceSpec,
    c2: f64,
    mu_prime: f64,
    n: f64,
    s_max: f64,
) -> std::result::Result<A2Certificate, Violation> {
    let g0 = source.eval(0.0);
    if !(g0 >= 0.0) {
        return Err(Violation::new("g(0) >= 0", format!("g(0) = {g0}"), Some(0.0)));
    }
    if !(n > 0.0) || !(c2 >= 0.0) || !(mu_prime >= 0.0) {
        return Err(Violation::new("c2, mu', n > 0", format!("c2 = {c2}, mu' = {mu_prime}, n = {n}"), None));
    }
    for s in source_samples(s_max) {
        let lhs = source.eval(s).abs();
        let rhs = c2 + mu_prime * s.powf(n);
        if !(lhs <= rhs * (1.0 + SAMPLE_TOL) + SAMPLE_TOL) {
            return Err(Violation::new("|g(s)| <= c2 + mu' s^n", format!("{lhs:e} > {rhs:e}"), Some(s)));
        }
    }
    Ok(A2Certificate { c2, mu_prime, n })
}

/// Nonlinear noise that passed the exponent conditions, optionally jointly
/// with the source's growth certificate.
#[derive(Debug, Clone)]
pub struct NonlinearNoise {
    spec: NonlinearNoiseSpec,
    n: f64,
    source: Option<A2Certificate>,
}

impl NonlinearNoise {
    pub fn spec(&self) -> &NonlinearNoiseSpec {
        &self.spec
    }

    /// Growth exponent `n` the conditions were checked against.
    pub fn n(&self) -> f64 {
        self.n
    }

    pub fn source_certificate(&self) -> Option<&A2Certificate> {
        self.source.as_ref()
    }
}

/// Exponent conditions for the norm-nonlinear noise with `N = max(2, n)`,
/// checked in order `r > (N - 1)/2`, `q >= 2r`, `q > 2(N - 1) r / (2r - N + 1)`,
/// finite `sum b_i^2`, then `q >= 2`.
pub fn validate_a1(noise: &NonlinearNoiseSpec, n: f64) -> std::result::Result<NonlinearNoise, Violation> {
    let top = n.max(2.0);
    let (q, r) = (noise.q, noise.r);
    if !(r > (top - 1.0) / 2.0) {
        return Err(Violation::new("r > (2 v n - 1) / 2", format!("r = {r}, bound = {}", (top - 1.0) / 2.0), None));
    }
    if !(q >= 2.0 * r) {
        return Err(Violation::new("q >= 2r", format!("q = {q}, 2r = {}", 2.0 * r), None));
    }
    let bound = 2.0 * (top - 1.0) * r / (2.0 * r - top + 1.0);
    if !(q > bound) {
        return Err(Violation::new(
            "q > 2 (2 v n - 1) r / (2r - 2 v n + 1)",
            format!("q = {q}, bound = {bound}"),
            None,
        ));
    }
    if !noise.b_sum_sq().is_finite() {
        return Err(Violation::new("sum b_i^2 < inf", "non-finite weights", None));
    }
    if !(q >= 2.0) {
        return Err(Violation::new("q >= 2", format!("q = {q}"), None));
    }
    Ok(NonlinearNoise { spec: noise.clone(), n, source: None })
}

/// [`validate_a1`] followed by [`validate_a2`] on the source.
pub fn validate_a1_a2(
    noise: &NonlinearNoiseSpec,
    source: &SourceSpec,
    c2: f64,
    mu_prime: f64,
    n: f64,
    s_max: f64,
) -> std::result::Result<NonlinearNoise, Violation> {
    let mut certified = validate_a1(noise, n)?;
    certified.source = Some(validate_a2(source, c2, mu_prime, n, s_max)?);
    Ok(certified)
}

/// Open interval of admissible moment exponents `(2, chi / (chi - mu)^+)`;
/// `None` when it is empty, i.e. `mu <= chi / 2`.
pub fn p0_window(chi: f64, mu: f64) -> Option<(f64, f64)> {
    let gap = (chi - mu).max(0.0);
    let upper = if gap == 0.0 { f64::INFINITY } else { chi / gap };
    if upper > 2.0 {
        Some((2.0, upper))
    } else {
        None
    }
}

/// Damping margin `p0 mu - (p0 - 1) chi`.
pub fn delta(p0: f64, chi: f64, mu: f64) -> f64 {
    p0 * mu - (p0 - 1.0) * chi
}

/// Upper end of the admissible fractional-moment exponents,
/// `1 / (2 max(2, n, r + 1))`.
pub fn gamma_upper(n: f64, r: f64) -> f64 {
    1.0 / (2.0 * 2f64.max(n).max(r + 1.0))
}

#[derive(Debug, Clone)]
pub enum Noise {
    None,
    Linear(LinearNoise),
    Nonlinear(NonlinearNoise),
}

impl Noise {
    pub fn k_modes(&self) -> usize {
        match self {
            Noise::None => 0,
            Noise::Linear(n) => n.spec.kappas.len(),
            Noise::Nonlinear(n) => n.spec.bs.len(),
        }
    }

    pub fn is_nonlinear(&self) -> bool {
        matches!(self, Noise::Nonlinear(_))
    }
}

#[derive(Debug, Clone)]
pub struct ModelParams {
    pub chi: f64,
    pub source: SourceSpec,
    pub noise: Noise,
    u0: ScalarField,
    mass: f64,
}

impl ModelParams {
    /// `chi = 0` is accepted so the stepper can be exercised on the heat and
    /// reaction parts alone.
    pub fn new(chi: f64, source: SourceSpec, noise: Noise, u0: ScalarField) -> Result<Self> {
        if !(chi >= 0.0) || !chi.is_finite() {
            return Err(invalid(format!("chi must be finite and >= 0, got {chi}")));
        }
        if !u0.is_finite() {
            return Err(invalid("initial density has non-finite values"));
        }
        if u0.min() < 0.0 {
            return Err(invalid(format!("initial density must be nonnegative, min = {}", u0.min())));
        }
        let mass = u0.integral();
        Ok(Self { chi, source, noise, u0, mass })
    }

    pub fn u0(&self) -> &ScalarField {
        &self.u0
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Grid2D;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn h1_linear_profile_constant() {
        let spec = LinearNoiseSpec::new(vec![1.0, 0.5, 0.25], Profile::Linear);
        let cert = validate_h1(&spec, DEFAULT_PROFILE_WINDOW).unwrap();
        assert!((cert.k() - 21f64.sqrt() / 4.0).abs() < 1e-12);
        assert_eq!(cert.lipschitz(), 1.0);
    }

    #[test]
    fn h1_saturating_profile_has_unit_slope() {
        let spec = LinearNoiseSpec::new(vec![1.0], Profile::Saturating);
        let cert = validate_h1(&spec, DEFAULT_PROFILE_WINDOW).unwrap();
        assert!((cert.lipschitz() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn h1_rejects_nonzero_origin() {
        let spec = LinearNoiseSpec::new(vec![1.0], Profile::Affine { slope: 1.0, offset: 1.0 });
        let v = validate_h1(&spec, DEFAULT_PROFILE_WINDOW).unwrap_err();
        assert_eq!(v.condition, "sigma(0) = 0");
    }

    #[test]
    fn h1_rejects_unbounded_slope() {
        let spec =
            LinearNoiseSpec::new(vec![1.0], Profile::Custom(ScalarFn::new(|z: f64| z.signum() * z.abs().sqrt())));
        assert!(validate_h1(&spec, 10.0).is_err());
    }

    #[test]
    fn h1_bounds_hold_on_random_pairs() {
        let spec = LinearNoiseSpec::new(vec![0.3, -0.2, 0.1], Profile::Saturating);
        let cert = validate_h1(&spec, DEFAULT_PROFILE_WINDOW).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let kl2 = spec.kappa_l2();
        for _ in 0..100_000 {
            let z1: f64 = rng.random_range(-20.0..20.0);
            let z2: f64 = rng.random_range(-20.0..20.0);
            let diff = kl2 * (spec.profile.eval(z1) - spec.profile.eval(z2)).abs();
            assert!(diff <= cert.k() * (z1 - z2).abs() * (1.0 + 1e-12));
            assert!(cert.l2_at(z1) <= cert.k() * (z1.abs() + 1.0));
        }
    }

    #[test]
    fn h2_logistic_closed_form() {
        let (mu, eps) = (1.0, 0.1);
        let cert = validate_h2(&SourceSpec::logistic(mu), mu - eps, None, DEFAULT_S_MAX).unwrap();
        assert_eq!(cert.method, CertMethod::Analytic);
        assert!((cert.c1 - mu * mu / (4.0 * eps)).abs() < 1e-12);
        // re-checkable by sampling
        let again = validate_h2(&SourceSpec::logistic(mu), cert.mu_tilde, Some(cert.c1), DEFAULT_S_MAX).unwrap();
        assert_eq!(again.method, CertMethod::Sampled);
    }

    #[test]
    fn h2_rejects_sources_without_quadratic_damping() {
        let linear = SourceSpec::Polynomial { coeffs: vec![0.0, 1.0] };
        assert!(validate_h2(&linear, 0.5, None, DEFAULT_S_MAX).is_err());
        assert!(validate_h2(&linear, 0.5, Some(10.0), DEFAULT_S_MAX).is_err());

        let (c1, mt) = (4.0, 1.0);
        let v = validate_h2(&SourceSpec::zero(), mt, Some(c1), DEFAULT_S_MAX).unwrap_err();
        assert!(v.witness.unwrap() > (c1 / mt).sqrt());
        assert!(validate_h2(&SourceSpec::zero(), mt, None, DEFAULT_S_MAX).is_err());

        assert!(validate_h2(&SourceSpec::logistic(1.0), 1.0, None, DEFAULT_S_MAX).is_err());
        let negative = SourceSpec::Polynomial { coeffs: vec![-1.0, 0.0, -2.0] };
        assert_eq!(validate_h2(&negative, 1.0, None, DEFAULT_S_MAX).unwrap_err().condition, "g(0) >= 0");
    }

    #[test]
    fn h2_sampled_certificate_is_recheckable() {
        let g = SourceSpec::Polynomial { coeffs: vec![0.5, 2.0, -3.0] };
        let cert = validate_h2(&g, 1.0, None, DEFAULT_S_MAX).unwrap();
        assert_eq!(cert.method, CertMethod::Sampled);
        // max of 0.5 + 2s - 2s^2 is 1 at s = 1/2
        assert!((cert.c1 - 1.0).abs() < 1e-9);
        validate_h2(&g, 1.0, Some(cert.c1), DEFAULT_S_MAX).unwrap();
    }

    fn a1(q: f64, r: f64, n: f64) -> std::result::Result<NonlinearNoise, Violation> {
        validate_a1_a2(&NonlinearNoiseSpec::new(vec![0.5], q, r), &SourceSpec::zero(), 0.0, 1.0, n, DEFAULT_S_MAX)
    }

    #[test]
    fn a1_truth_table() {
        assert!(a1(4.0, 1.0, 2.0).is_ok());
        assert_eq!(a1(2.0, 1.0, 2.0).unwrap_err().condition, "q > 2 (2 v n - 1) r / (2r - 2 v n + 1)");
        for q in [2.0, 4.0, 100.0] {
            assert_eq!(a1(q, 0.25, 2.0).unwrap_err().condition, "r > (2 v n - 1) / 2");
            assert_eq!(a1(q, 0.25, 1.0).unwrap_err().condition, "r > (2 v n - 1) / 2");
        }
        assert_eq!(a1(1.5, 1.0, 2.0).unwrap_err().condition, "q >= 2r");
    }

    #[test]
    fn a2_growth_bound() {
        let logistic = SourceSpec::logistic(1.0);
        assert!(validate_a2(&logistic, 1.0, 1.0, 2.0, DEFAULT_S_MAX).is_ok());
        assert!(validate_a2(&logistic, 0.0, 0.5, 2.0, DEFAULT_S_MAX).is_err());
        let v = validate_a1_a2(&NonlinearNoiseSpec::new(vec![0.5], 4.0, 1.0), &logistic, 0.0, 0.5, 2.0, DEFAULT_S_MAX)
            .unwrap_err();
        assert_eq!(v.condition, "|g(s)| <= c2 + mu' s^n");
    }

    #[test]
    fn p0_window_examples() {
        let (lo, hi) = p0_window(1.0, 0.75).unwrap();
        assert_eq!(lo, 2.0);
        assert!((hi - 4.0).abs() < 1e-15);
        assert_eq!(p0_window(1.0, 1.5).unwrap().1, f64::INFINITY);
        assert!(p0_window(1.0, 0.5).is_none());
        assert!(p0_window(1.0, 0.3).is_none());
    }

    #[test]
    fn delta_positive_across_window() {
        for &(chi, mu) in &[(1.0, 0.9), (1.0, 0.51), (2.0, 1.5), (1.0, 3.0)] {
            let (lo, hi) = p0_window(chi, mu).unwrap();
            let hi = hi.min(50.0);
            for i in 1..200 {
                let p0 = lo + (hi - lo) * i as f64 / 200.0;
                assert!(delta(p0, chi, mu) > 0.0, "chi {chi} mu {mu} p0 {p0}");
            }
        }
    }

    #[test]
    fn gamma_window() {
        assert_eq!(gamma_upper(2.0, 1.0), 0.25);
        assert_eq!(gamma_upper(1.0, 3.0), 0.125);
    }

    #[test]
    fn model_params_checks_initial_density() {
        let g = Grid2D::new(8, 8, 1.0, 1.0).unwrap();
        let u0 = ScalarField::constant(&g, 2.0);
        let p = ModelParams::new(1.0, SourceSpec::zero(), Noise::None, u0.clone()).unwrap();
        assert!((p.mass() - 2.0).abs() < 1e-12);
        assert!((p.u0().integral() - p.mass()).abs() < 1e-12);
        let neg = u0.map(|v| v - 3.0);
        assert!(ModelParams::new(1.0, SourceSpec::zero(), Noise::None, neg).is_err());
        assert!(ModelParams::new(-1.0, SourceSpec::zero(), Noise::None, u0).is_err());
    }
}
