//! Threshold machinery for the k-XORSAT ensemble: the fixed-point map
//! `φ(α) = 1 − exp(−dα^{k−1})`, its potential `Φ`, the thresholds `d_k*` and
//! `d_k`, and the predicted Warning Propagation statistics.

use serde::{Deserialize, Serialize};
use statrs::function::factorial;

use crate::error::{Error, Result};
use crate::galois::{FieldElement, FieldSpec};

pub const MAX_D: f64 = 20.0;
pub const MAX_K: u32 = 16;
/// Uniform grid size used to bracket the roots of `φ(α) − α`.
pub const GRID_POINTS: usize = 10_000;
/// Detail-table cells below this mass are dropped by [`PredictedStats::cells`].
pub const CELL_CUTOFF: f64 = 1e-12;
pub const CHECK_POLY_BUDGET: u128 = 10_000_000;

const DOUBLE_ROOT_TOL: f64 = 1e-10;

pub fn ln_factorial(n: u64) -> f64 {
    factorial::ln_factorial(n)
}

/// `P[Po(λ) = j]`.
pub fn poisson_pmf(lambda: f64, j: u64) -> f64 {
    if lambda <= 0.0 {
        return if j == 0 { 1.0 } else { 0.0 };
    }
    (-lambda + j as f64 * lambda.ln() - ln_factorial(j)).exp()
}

/// `P[Po(λ) = j | Po(λ) >= 2]`; the `λ → 0` limit is a point mass at 2.
pub fn po_ge2_pmf(lambda: f64, j: u64) -> f64 {
    if j < 2 || lambda < 0.0 {
        return 0.0;
    }
    // both numerator and denominator carry a factor λ² e^{−λ}
    let tail = if lambda <= 1.0 {
        // Σ_i λ^i / (i+2)!
        let mut term = 0.5;
        let mut s = 0.0;
        for i in 0..30 {
            s += term;
            term *= lambda / (i as f64 + 3.0);
        }
        s
    } else {
        (lambda.exp_m1() - lambda) / (lambda * lambda)
    };
    let num = if j == 2 {
        0.5
    } else if lambda == 0.0 {
        0.0
    } else {
        ((j as f64 - 2.0) * lambda.ln() - ln_factorial(j)).exp()
    };
    num / tail
}

/// `P[Bin(N, p) = j | Bin(N, p) >= 2]`; `p → 0` gives a point mass at 2.
pub fn bin_ge2_pmf(big_n: u64, p: f64, j: u64) -> f64 {
    if j < 2 || j > big_n || big_n < 2 || !(0.0..=1.0).contains(&p) {
        return 0.0;
    }
    // divide numerator and denominator by p²
    let reduced = |i: u64| {
        factorial::binomial(big_n, i) * p.powi(i as i32 - 2) * (1.0 - p).powi((big_n - i) as i32)
    };
    let tail: f64 = (2..=big_n).map(reduced).sum();
    reduced(j) / tail
}

fn check_box(d: f64, k: u32) -> Result<()> {
    if !(d > 0.0 && d <= MAX_D) {
        return Err(Error::Domain(format!(
            "density d = {d} outside (0, {MAX_D}]"
        )));
    }
    if !(3..=MAX_K).contains(&k) {
        return Err(Error::Domain(format!(
            "row weight k = {k} outside [3, {MAX_K}]"
        )));
    }
    Ok(())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Domain(format!("alpha = {alpha} outside [0, 1]")));
    }
    Ok(())
}

/// `(d, k)` inside the supported box `0 < d <= 20`, `3 <= k <= 16`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Potential {
    d: f64,
    k: u32,
}

impl Potential {
    pub fn new(d: f64, k: u32) -> Result<Self> {
        check_box(d, k)?;
        Ok(Potential { d, k })
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    fn kf(&self) -> f64 {
        self.k as f64
    }

    pub fn phi(&self, alpha: f64) -> f64 {
        -(-self.d * alpha.powi(self.k as i32 - 1)).exp_m1()
    }

    pub fn phi_prime(&self, alpha: f64) -> f64 {
        let a = alpha.powi(self.k as i32 - 2);
        self.d * (self.kf() - 1.0) * a * (-self.d * a * alpha).exp()
    }

    #[allow(non_snake_case)]
    pub fn Phi(&self, alpha: f64) -> f64 {
        let (d, k) = (self.d, self.kf());
        let ak1 = alpha.powi(self.k as i32 - 1);
        (-d * ak1).exp() + d * ak1 - d * (k - 1.0) / k * ak1 * alpha - d / k
    }

    #[allow(non_snake_case)]
    pub fn Phi_prime(&self, alpha: f64) -> f64 {
        self.d * (self.kf() - 1.0) * alpha.powi(self.k as i32 - 2) * (self.phi(alpha) - alpha)
    }

    #[allow(non_snake_case)]
    pub fn Phi_second(&self, alpha: f64) -> f64 {
        let (d, k) = (self.d, self.kf());
        d * (k - 1.0) * (k - 2.0) * alpha.powi(self.k as i32 - 3) * (self.phi(alpha) - alpha)
            - d * (k - 1.0) * alpha.powi(self.k as i32 - 2) * (1.0 - self.phi_prime(alpha))
    }

    /// `φ(α)/α − 1`; its zeros in `(0, 1]` are the positive fixed points.
    fn gap(&self, alpha: f64) -> f64 {
        self.phi(alpha) / alpha - 1.0
    }

    /// Maximiser of `φ(α)/α − 1` over `(0, 1]`: grid search then golden section.
    fn gap_max(&self) -> (f64, f64) {
        let h = 1.0 / GRID_POINTS as f64;
        let mut best = 1;
        let mut best_val = self.gap(h);
        for i in 2..=GRID_POINTS {
            let v = self.gap(i as f64 * h);
            if v > best_val {
                best = i;
                best_val = v;
            }
        }
        let (mut lo, mut hi) = ((best - 1) as f64 * h, ((best + 1) as f64 * h).min(1.0));
        let inv_gr = (5f64.sqrt() - 1.0) / 2.0;
        let mut x1 = hi - inv_gr * (hi - lo);
        let mut x2 = lo + inv_gr * (hi - lo);
        let (mut f1, mut f2) = (self.gap(x1), self.gap(x2));
        while hi - lo > 1e-14 {
            if f1 < f2 {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + inv_gr * (hi - lo);
                f2 = self.gap(x2);
            } else {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - inv_gr * (hi - lo);
                f1 = self.gap(x1);
            }
        }
        let x = 0.5 * (lo + hi);
        let v = self.gap(x);
        if v >= best_val {
            (x, v)
        } else {
            (best as f64 * h, best_val)
        }
    }

    fn bisect(&self, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
        let rising = self.gap(lo) < 0.0;
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            if (self.gap(mid) < 0.0) == rising {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    pub fn fixed_points(&self, tol: f64) -> FixedPoints {
        let (amax, gmax) = self.gap_max();
        if gmax < -DOUBLE_ROOT_TOL {
            return FixedPoints {
                alpha_u: 0.0,
                alpha_s: 0.0,
                alpha_f: 0.0,
                degenerate: false,
            };
        }
        if gmax <= 0.0 {
            return FixedPoints {
                alpha_u: 0.0,
                alpha_s: amax,
                alpha_f: amax,
                degenerate: true,
            };
        }
        // the gap is negative on (0, α_s) and at α = 1
        let h = 1.0 / GRID_POINTS as f64;
        let mut lo = amax;
        while lo > h && self.gap(lo) >= 0.0 {
            lo -= h;
        }
        let lo = lo.max(h);
        let alpha_s = self.bisect(lo, amax, tol);
        let alpha_f = if self.gap(1.0) >= 0.0 {
            1.0
        } else {
            self.bisect(amax, 1.0, tol)
        };
        FixedPoints {
            alpha_u: 0.0,
            alpha_s,
            alpha_f,
            degenerate: false,
        }
    }

    fn has_positive_fixed_point(&self) -> bool {
        self.gap_max().1 >= -DOUBLE_ROOT_TOL
    }

    /// `max_{α ∈ (0,1]} Φ(α) − Φ(0)`, taken over the stationary points.
    fn potential_gap(&self) -> f64 {
        let fp = self.fixed_points(1e-13);
        if fp.alpha_f == 0.0 {
            return f64::NEG_INFINITY;
        }
        self.Phi(fp.alpha_s).max(self.Phi(fp.alpha_f)) - self.Phi(0.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixedPoints {
    pub alpha_u: f64,
    pub alpha_s: f64,
    pub alpha_f: f64,
    /// `α_s = α_f` is a double root.
    pub degenerate: bool,
}

pub fn phi(d: f64, k: u32, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(Potential::new(d, k)?.phi(alpha))
}

#[allow(non_snake_case)]
pub fn Phi(d: f64, k: u32, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(Potential::new(d, k)?.Phi(alpha))
}

#[allow(non_snake_case)]
pub fn Phi_prime(d: f64, k: u32, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(Potential::new(d, k)?.Phi_prime(alpha))
}

#[allow(non_snake_case)]
pub fn Phi_second(d: f64, k: u32, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(Potential::new(d, k)?.Phi_second(alpha))
}

/// All solutions of `φ(α) = α` in `[0, 1]`. Below `d_k*` the triple is all zero.
pub fn fixed_points(d: f64, k: u32, tol: f64) -> Result<FixedPoints> {
    Ok(Potential::new(d, k)?.fixed_points(tol))
}

fn bisect_density(mut lo: f64, mut hi: f64, tol: f64, above: impl Fn(f64) -> bool) -> f64 {
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if above(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Smallest density with a positive fixed point.
pub fn threshold_dk_star(k: u32, tol: f64) -> Result<f64> {
    check_box(1.0, k)?;
    Ok(bisect_density(0.5, MAX_D, tol, |d| {
        Potential { d, k }.has_positive_fixed_point()
    }))
}

/// `d_k = sup{d : max_α Φ(α) = Φ(0)}`.
pub fn threshold_dk(k: u32, tol: f64) -> Result<f64> {
    let lo = threshold_dk_star(k, tol)?;
    Ok(bisect_density(lo, MAX_D, tol, |d| {
        Potential { d, k }.potential_gap() > 0.0
    }))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `d < d_k*`: only the trivial fixed point.
    Subcritical,
    /// `d ≈ d_k*`: `α_s = α_f` double root.
    Degenerate,
    /// `d_k* < d <= d_k`.
    Intermediate,
    /// `d > d_k`.
    Supercritical,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub k: u32,
    pub d: Option<f64>,
    pub d_k: f64,
    pub d_k_star: f64,
    pub d_k_over_k: f64,
    pub fixed_points: Option<FixedPoints>,
    /// `Φ` at `α_u`, `α_s`, `α_f`.
    pub phi_values: Option<[f64; 3]>,
    pub regime: Option<Regime>,
}

pub fn threshold_report(k: u32, d: Option<f64>) -> Result<ThresholdReport> {
    let d_k = threshold_dk(k, 1e-9)?;
    let d_k_star = threshold_dk_star(k, 1e-9)?;
    let mut report = ThresholdReport {
        k,
        d,
        d_k,
        d_k_star,
        d_k_over_k: d_k / k as f64,
        fixed_points: None,
        phi_values: None,
        regime: None,
    };
    if let Some(d) = d {
        let pot = Potential::new(d, k)?;
        let fp = pot.fixed_points(1e-12);
        report.phi_values = Some([
            pot.Phi(fp.alpha_u),
            pot.Phi(fp.alpha_s),
            pot.Phi(fp.alpha_f),
        ]);
        report.regime = Some(if fp.degenerate {
            Regime::Degenerate
        } else if fp.alpha_f == 0.0 {
            Regime::Subcritical
        } else if d <= d_k {
            Regime::Intermediate
        } else {
            Regime::Supercritical
        });
        report.fixed_points = Some(fp);
    }
    Ok(report)
}

/// Node label `𝚞` (unfrozen), `𝚜` (slush) or `𝚏` (frozen).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "u")]
    U,
    #[serde(rename = "s")]
    S,
    #[serde(rename = "f")]
    F,
}

impl Label {
    pub const ALL: [Label; 3] = [Label::U, Label::S, Label::F];

    pub fn as_char(self) -> char {
        match self {
            Label::U => 'u',
            Label::S => 's',
            Label::F => 'f',
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

/// `ℓ = (ℓ_uu, ℓ_uf, ℓ_fu, ℓ_ff)`; `ℓ_st` counts edges with incoming `s`
/// and outgoing `t`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StatKey {
    pub uu: u32,
    pub uf: u32,
    pub fu: u32,
    pub ff: u32,
}

impl StatKey {
    pub fn new(uu: u32, uf: u32, fu: u32, ff: u32) -> Self {
        StatKey { uu, uf, fu, ff }
    }

    pub fn degree(&self) -> u32 {
        self.uu + self.uf + self.fu + self.ff
    }
}

/// Variable class sets `𝒟(z)`.
pub fn in_var_class(z: Label, l: &StatKey) -> bool {
    match z {
        Label::U => l.fu == 0 && l.uf == 0 && l.ff == 0,
        Label::S => l.fu == 1 && l.ff == 0 && l.uu == 0,
        Label::F => l.uu == 0 && l.fu == 0 && l.ff >= 2,
    }
}

/// Check class sets `𝒢(z)` for checks of degree `k`.
pub fn in_check_class(z: Label, l: &StatKey, k: u32) -> bool {
    match z {
        Label::U => l.uf == 0 && l.ff == 0 && l.uu >= 2 && l.fu + l.uu == k,
        Label::S => l.uu == 0 && l.ff == 0 && l.uf == 1 && l.fu == k - 1,
        Label::F => l.uu == 0 && l.uf == 0 && l.fu == 0 && l.ff == k,
    }
}

/// Predicted node fractions and detail tables at a given `α`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictedStats {
    pub d: f64,
    pub k: u32,
    pub alpha: f64,
    /// `δ̄(α, z)` indexed by `Label::index`.
    pub delta: [f64; 3],
    /// `γ̄(α, z)`.
    pub gamma: [f64; 3],
}

pub fn predicted_node_stats(d: f64, k: u32, alpha: f64) -> Result<PredictedStats> {
    check_box(d, k)?;
    check_alpha(alpha)?;
    let kf = k as f64;
    let lam = d * alpha.powi(k as i32 - 1);
    let e = (-lam).exp();
    let ak1 = alpha.powi(k as i32 - 1);
    Ok(PredictedStats {
        d,
        k,
        alpha,
        delta: [e, lam * e, 1.0 - e * (1.0 + lam)],
        gamma: [
            1.0 - kf * (1.0 - alpha) * ak1 - ak1 * alpha,
            kf * (1.0 - alpha) * ak1,
            ak1 * alpha,
        ],
    })
}

impl PredictedStats {
    fn lambda_f(&self) -> f64 {
        self.d * self.alpha.powi(self.k as i32 - 1)
    }

    fn lambda_u(&self) -> f64 {
        self.d * (1.0 - self.alpha.powi(self.k as i32 - 1))
    }

    /// `Δ̄_{z,ℓ}(α)`.
    pub fn delta_bar(&self, z: Label, l: &StatKey) -> f64 {
        if !in_var_class(z, l) {
            return 0.0;
        }
        let w = self.delta[z.index()];
        match z {
            Label::U => w * poisson_pmf(self.lambda_u(), l.uu as u64),
            Label::S => w * poisson_pmf(self.lambda_u(), l.uf as u64),
            Label::F => {
                w * po_ge2_pmf(self.lambda_f(), l.ff as u64)
                    * poisson_pmf(self.lambda_u(), l.uf as u64)
            }
        }
    }

    /// `Γ̄_{z,ℓ}(α)`.
    pub fn gamma_bar(&self, z: Label, l: &StatKey) -> f64 {
        if !in_check_class(z, l, self.k) {
            return 0.0;
        }
        let w = self.gamma[z.index()];
        match z {
            Label::U => w * bin_ge2_pmf(self.k as u64, 1.0 - self.alpha, l.uu as u64),
            Label::S | Label::F => w,
        }
    }

    /// All detail cells with mass at least `cutoff`: `(is_check, z, ℓ, mass)`.
    pub fn cells(&self, cutoff: f64) -> Vec<(bool, Label, StatKey, f64)> {
        let mut out = Vec::new();
        let mut push = |is_check: bool, z: Label, l: StatKey, v: f64| {
            if v >= cutoff && v > 0.0 {
                out.push((is_check, z, l, v));
            }
        };
        let lu = self.lambda_u();
        let jmax = poisson_support_bound(lu.max(self.lambda_f()), cutoff);
        for j in 0..=jmax {
            push(
                false,
                Label::U,
                StatKey::new(j, 0, 0, 0),
                self.delta_bar(Label::U, &StatKey::new(j, 0, 0, 0)),
            );
            push(
                false,
                Label::S,
                StatKey::new(0, j, 1, 0),
                self.delta_bar(Label::S, &StatKey::new(0, j, 1, 0)),
            );
            for i in 2..=jmax {
                let key = StatKey::new(0, j, 0, i);
                push(false, Label::F, key, self.delta_bar(Label::F, &key));
            }
        }
        let k = self.k;
        for j in 2..=k {
            let key = StatKey::new(j, 0, k - j, 0);
            push(true, Label::U, key, self.gamma_bar(Label::U, &key));
        }
        push(
            true,
            Label::S,
            StatKey::new(0, 1, k - 1, 0),
            self.gamma[Label::S.index()],
        );
        push(
            true,
            Label::F,
            StatKey::new(0, 0, 0, k),
            self.gamma[Label::F.index()],
        );
        out
    }
}

fn poisson_support_bound(lambda: f64, cutoff: f64) -> u32 {
    let mut j = lambda.ceil() as u32 + 2;
    while poisson_pmf(lambda, j as u64) >= cutoff * 1e-3 {
        j += 1;
    }
    j
}

pub fn predicted_detail(d: f64, k: u32, alpha: f64, z: Label, l: &StatKey) -> Result<(f64, f64)> {
    let p = predicted_node_stats(d, k, alpha)?;
    Ok((p.delta_bar(z, l), p.gamma_bar(z, l)))
}

/// `f_χ(r) = Σ_{σ ∈ 𝒳(χ)} Π_s r_s^{R_s(σ)}` by enumerating the solutions of
/// `Σ_j σ_j χ_j = 0` on the support of `χ`.
pub fn check_poly(field: &FieldSpec, chi: &[FieldElement], r: &[f64]) -> Result<f64> {
    let q = field.q() as usize;
    if r.len() != q {
        return Err(Error::InvalidParams(format!(
            "distribution has {} entries, expected {q}",
            r.len()
        )));
    }
    let support: Vec<FieldElement> = chi.iter().copied().filter(|c| !c.is_zero()).collect();
    let k = support.len();
    if k == 0 {
        return Err(Error::InvalidParams("chi has empty support".into()));
    }
    let needed = (q as u128).pow(k as u32 - 1);
    if needed > CHECK_POLY_BUDGET {
        return Err(Error::BudgetExceeded {
            what: "check polynomial enumeration",
            needed,
            budget: CHECK_POLY_BUDGET,
        });
    }
    let last_inv = field.inv(support[k - 1])?;
    let mut sigma = vec![0u32; k - 1];
    let mut total = 0.0;
    loop {
        let mut acc = FieldElement::ZERO;
        let mut prod = 1.0;
        for (j, &s) in sigma.iter().enumerate() {
            acc = field.add(acc, field.mul(FieldElement(s), support[j]));
            prod *= r[s as usize];
        }
        let last = field.mul(field.neg(acc), last_inv);
        total += prod * r[last.0 as usize];
        // odometer increment
        let mut pos = 0;
        loop {
            if pos == k - 1 {
                return Ok(total);
            }
            sigma[pos] += 1;
            if (sigma[pos] as usize) < q {
                break;
            }
            sigma[pos] = 0;
            pos += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn potential_at_zero() {
        for &(d, k) in &[(1.0, 3), (2.9, 3), (5.0, 7)] {
            assert!((Phi(d, k, 0.0).unwrap() - (1.0 - d / k as f64)).abs() < 1e-15);
            assert_eq!(phi(d, k, 0.0).unwrap(), 0.0);
            assert!((phi(d, k, 1.0).unwrap() - (1.0 - (-d).exp())).abs() < 1e-15);
        }
    }

    #[test]
    fn domain_errors() {
        assert!(Potential::new(0.0, 3).is_err());
        assert!(Potential::new(21.0, 3).is_err());
        assert!(Potential::new(2.0, 2).is_err());
        assert!(Potential::new(2.0, 17).is_err());
        assert!(phi(2.0, 3, 1.5).is_err());
        assert!(threshold_dk(2, 1e-9).is_err());
    }

    #[test]
    fn subcritical_triple_is_zero() {
        let fp = fixed_points(2.0, 3, 1e-12).unwrap();
        assert_eq!((fp.alpha_u, fp.alpha_s, fp.alpha_f), (0.0, 0.0, 0.0));
    }

    #[test]
    fn supercritical_roots() {
        let pot = Potential::new(2.9, 3).unwrap();
        let fp = pot.fixed_points(1e-12);
        assert!(0.0 < fp.alpha_s && fp.alpha_s < fp.alpha_f);
        for a in [fp.alpha_s, fp.alpha_f] {
            assert!((pot.phi(a) - a).abs() <= 1e-10);
            assert!(pot.Phi_prime(a).abs() <= 1e-6);
        }
    }

    #[test]
    fn double_root_near_dk_star() {
        let ds = threshold_dk_star(3, 1e-11).unwrap();
        let fp = fixed_points(ds + 1e-12, 3, 1e-12).unwrap();
        assert!(fp.alpha_f > 0.5);
        assert!((fp.alpha_f - fp.alpha_s).abs() < 1e-3);
    }

    #[test]
    fn thresholds_ordered() {
        let ds = threshold_dk_star(3, 1e-9).unwrap();
        let d = threshold_dk(3, 1e-9).unwrap();
        assert!(ds < d);
        let pot = Potential::new(d, 3).unwrap();
        let fp = pot.fixed_points(1e-12);
        assert!((pot.Phi(fp.alpha_f) - (1.0 - d / 3.0)).abs() <= 1e-6);
    }

    #[test]
    fn node_fractions() {
        let p = predicted_node_stats(2.5, 3, 0.0).unwrap();
        assert_eq!(p.delta, [1.0, 0.0, 0.0]);
        assert_eq!(p.gamma[0], 1.0);
        let p = predicted_node_stats(2.5, 3, 1.0).unwrap();
        assert_eq!((p.gamma[1], p.gamma[2]), (0.0, 1.0));
    }

    #[test]
    fn conditional_pmfs() {
        assert_eq!(po_ge2_pmf(1.3, 1), 0.0);
        assert_eq!(po_ge2_pmf(0.0, 2), 1.0);
        assert_eq!(po_ge2_pmf(0.0, 3), 0.0);
        for lam in [1e-9, 0.3, 1.0, 2.5, 12.0] {
            let s: f64 = (2..200).map(|j| po_ge2_pmf(lam, j)).sum();
            assert!((s - 1.0).abs() < 1e-12, "{lam}: {s}");
        }
        assert_eq!(bin_ge2_pmf(3, 0.0, 2), 1.0);
        assert_eq!(bin_ge2_pmf(3, 1.0, 3), 1.0);
        assert_eq!(bin_ge2_pmf(3, 0.4, 1), 0.0);
    }

    #[test]
    fn frozen_check_cell() {
        let p = predicted_node_stats(2.9, 3, 0.7).unwrap();
        assert_eq!(
            p.gamma_bar(Label::F, &StatKey::new(0, 0, 0, 3)),
            0.7f64.powi(3)
        );
        assert_eq!(p.gamma_bar(Label::F, &StatKey::new(0, 0, 1, 2)), 0.0);
    }

    #[test]
    fn alpha_zero_detail() {
        let p = predicted_node_stats(2.0, 3, 0.0).unwrap();
        for j in 0..10 {
            let v = p.delta_bar(Label::U, &StatKey::new(j, 0, 0, 0));
            assert!((v - poisson_pmf(2.0, j as u64)).abs() < 1e-15);
        }
    }

    #[test]
    fn cells_are_normalised() {
        let p = predicted_node_stats(2.9, 3, 0.6).unwrap();
        let cells = p.cells(CELL_CUTOFF);
        let var: f64 = cells.iter().filter(|c| !c.0).map(|c| c.3).sum();
        let chk: f64 = cells.iter().filter(|c| c.0).map(|c| c.3).sum();
        assert!((var - 1.0).abs() < 1e-10 && (chk - 1.0).abs() < 1e-10);
    }

    #[test]
    fn check_poly_parity() {
        let f2 = FieldSpec::new(2).unwrap();
        let chi = [FieldElement(1); 3];
        for rho in [0.0, 0.1, 0.5, 0.8] {
            let v = check_poly(&f2, &chi, &[1.0 - rho, rho]).unwrap();
            assert!((v - (1.0 + (1.0 - 2.0 * rho).powi(3)) / 2.0).abs() < 1e-15);
        }
        assert!(check_poly(&f2, &chi, &[1.0]).is_err());
    }
}
