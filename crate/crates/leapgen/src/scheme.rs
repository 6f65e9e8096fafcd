//! Composition-scheme descriptions: the classes shipped with the crate, their
//! component series, singularities, Boltzmann moments and core-size supports.
//!
//! Singularities are located by bisection on the characteristic equation
//! `B(rho) = rho_A` in exact arithmetic (scaled-integer series evaluation),
//! which pins them to 30+ digits; the trailing coefficient-ratio estimate
//! seeds the bracket and doubles as an independent cross-check.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::series::{
    big, bigint_shifted, inv_e_rational, kary_mobile_b_series, ln2_rational,
    motzkin_b_series, phylo_b_series, polya_b_series, q_series_exact, q_series_f64, ratio,
    rho_from_ratios, scaled_coeffs_f64, schroder_b_series, schroder_mobile_b_series, seq_series,
    solve_fixed_point, solve_kary_mobile_series, solve_phylo_series, solve_polya_series,
    solve_schroder_mobile_series, sqrt2_rational, TruncatedSeries,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SchemeId {
    Motzkin,
    Schroder,
    Polya,
    Phylo,
    KaryMobile(usize),
    SchroderMobile,
}

impl SchemeId {
    pub fn name(&self) -> String {
        match self {
            SchemeId::Motzkin => "motzkin".into(),
            SchemeId::Schroder => "schroder".into(),
            SchemeId::Polya => "polya".into(),
            SchemeId::Phylo => "phylo".into(),
            SchemeId::KaryMobile(k) => format!("mobile:{k}"),
            SchemeId::SchroderMobile => "schroder-mobile".into(),
        }
    }

    pub fn parse(s: &str) -> Result<SchemeId> {
        match s {
            "motzkin" => Ok(SchemeId::Motzkin),
            "schroder" => Ok(SchemeId::Schroder),
            "polya" => Ok(SchemeId::Polya),
            "phylo" => Ok(SchemeId::Phylo),
            "schroder-mobile" => Ok(SchemeId::SchroderMobile),
            other => {
                if let Some(k) = other.strip_prefix("mobile:") {
                    let k: usize = k
                        .parse()
                        .map_err(|_| Error::Parse(format!("bad mobile arity in {other:?}")))?;
                    if k < 2 {
                        return Err(Error::InvalidParameter("mobile arity must be >= 2".into()));
                    }
                    Ok(SchemeId::KaryMobile(k))
                } else {
                    Err(Error::Parse(format!("unknown class {other:?}")))
                }
            }
        }
    }

    pub fn is_walk(&self) -> bool {
        matches!(self, SchemeId::Motzkin | SchemeId::Schroder)
    }
}

/// Integer set `{ k >= min : k = offset mod period }`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Support {
    pub min: usize,
    pub offset: usize,
    pub period: usize,
}

impl Support {
    pub fn all_from(min: usize) -> Support {
        Support {
            min,
            offset: 0,
            period: 1,
        }
    }

    pub fn contains(&self, k: usize) -> bool {
        k >= self.min && k % self.period == self.offset % self.period
    }
}

/// Everything the leap engine and the analytics need to know about one
/// supercritical composition scheme `C = D x A o B`.
#[derive(Clone, Debug)]
pub struct SchemeSpec {
    pub id: SchemeId,
    /// Singularity of the composed class.
    pub rho: f64,
    /// The same to 30+ digits.
    pub rho_rational: BigRational,
    /// `B(rho)` (= the singularity of the core class).
    pub b_at_rho: f64,
    /// Exact value of `B(rho)` when rational.
    pub b_at_rho_rational: Option<BigRational>,
    /// `D(rho)` for schemes with a distinguished first component.
    pub d_at_rho: Option<f64>,
    pub d_at_rho_rational: Option<BigRational>,
    /// Mean component size under the Boltzmann law at `rho`.
    pub mu: f64,
    /// Standard deviation of the component size.
    pub sigma: f64,
    /// Exact moments where the scheme has rational closed forms.
    pub mu_rational: Option<BigRational>,
    pub sigma_sq_rational: Option<BigRational>,
    /// Singular exponent of the core class (-1/2 for every shipped scheme).
    pub s_exponent: BigRational,
    /// Core-size support of the core class.
    pub support: Support,
    /// `C(rho)`, used as the table seed for tree classes sampled at the
    /// singularity.
    pub tau_c: Option<f64>,
    /// First-order coefficients `(a1, c1)` of the complete asymptotic
    /// expansions of the core and composed counting sequences; needed only
    /// for rejection acceleration of order >= 2.
    pub expansion: Option<(f64, f64)>,
    /// Horizontal-step weight for the weighted Motzkin variant.
    pub weight_u: BigRational,
    /// Unlabeled composed-class counting series (tree classes).
    pub a_tilde_series: Option<TruncatedSeries>,
    /// Component-class series.
    pub b_series: TruncatedSeries,
    /// First-component series, for walk schemes.
    pub d_series: Option<TruncatedSeries>,
}

const SERIES_ORDER: usize = 256;
const BISECT_SHIFT: u32 = 200;
const BISECT_ITERS: usize = 150;

/// Bisection on `B(x) = target` for an increasing series `B`.
fn bisect_characteristic(
    b: &TruncatedSeries,
    target: &BigRational,
    lo0: f64,
    hi0: f64,
) -> Result<BigRational> {
    let shift = BISECT_SHIFT;
    let target_scaled = bigint_shifted(target, shift);
    let eval = |x: &BigRational| -> std::cmp::Ordering {
        let xs = bigint_shifted(x, shift);
        b.eval_fixed(&xs, shift).cmp(&target_scaled)
    };
    let mut lo = BigRational::new(BigInt::from((lo0 * 1e12) as i64), BigInt::from(1_000_000_000_000i64));
    let mut hi = BigRational::new(BigInt::from((hi0 * 1e12) as i64), BigInt::from(1_000_000_000_000i64));
    if eval(&lo) != std::cmp::Ordering::Less || eval(&hi) != std::cmp::Ordering::Greater {
        return Err(Error::NonConvergence(format!(
            "characteristic bracket [{lo0}, {hi0}] does not straddle the root"
        )));
    }
    let two = big(2);
    for _ in 0..BISECT_ITERS {
        let mid = (&lo + &hi) / &two;
        match eval(&mid) {
            std::cmp::Ordering::Less => lo = mid,
            _ => hi = mid,
        }
    }
    Ok((&lo + &hi) / &two)
}

impl SchemeSpec {
    pub fn from_id(id: SchemeId) -> Result<SchemeSpec> {
        match id {
            SchemeId::Motzkin => Ok(SchemeSpec::motzkin()),
            SchemeId::Schroder => Ok(SchemeSpec::schroder()),
            SchemeId::Polya => SchemeSpec::polya(),
            SchemeId::Phylo => SchemeSpec::phylo(),
            SchemeId::KaryMobile(k) => SchemeSpec::kary_mobile(k),
            SchemeId::SchroderMobile => SchemeSpec::schroder_mobile(),
        }
    }

    pub fn from_name(name: &str) -> Result<SchemeSpec> {
        SchemeSpec::from_id(SchemeId::parse(name)?)
    }

    /// Motzkin walks: `D = Seq(Z)`, core = Dyck walks by semilength,
    /// components = pairs of horizontal runs. Everything rational:
    /// `rho = 1/3`, `B(rho) = 1/4`, `D(rho) = 3/2`, `mu = 3`, `sigma^2 = 3/2`.
    pub fn motzkin() -> SchemeSpec {
        SchemeSpec::motzkin_weighted(big(1))
    }

    /// Motzkin walks with every horizontal step carrying weight `u`:
    /// `rho = 1/(2+u)`, `mu = 2+u`, `sigma^2 = u(2+u)/2`.
    pub fn motzkin_weighted(u: BigRational) -> SchemeSpec {
        assert!(u > BigRational::zero());
        let rho = BigRational::one() / (&u + big(2));
        let mu = &u + big(2);
        let sigma_sq = &u * &mu / big(2);
        let d_at_rho = &mu / big(2); // 1/(1 - u rho) = (2+u)/2
        let b_series = motzkin_b_series(SERIES_ORDER, &u);
        let d_series = seq_series(SERIES_ORDER, &u);
        let expansion = if u.is_one() {
            Some((-9.0 / 8.0, motzkin_c1()))
        } else {
            None
        };
        SchemeSpec {
            id: SchemeId::Motzkin,
            rho: rho.to_f64().unwrap(),
            rho_rational: rho,
            b_at_rho: 0.25,
            b_at_rho_rational: Some(ratio(1, 4)),
            d_at_rho: Some(d_at_rho.to_f64().unwrap()),
            d_at_rho_rational: Some(d_at_rho),
            mu: mu.to_f64().unwrap(),
            sigma: sigma_sq.to_f64().unwrap().sqrt(),
            mu_rational: Some(mu),
            sigma_sq_rational: Some(sigma_sq),
            s_exponent: ratio(-1, 2),
            support: Support::all_from(0),
            tau_c: None,
            expansion,
            weight_u: u,
            a_tilde_series: None,
            b_series,
            d_series: Some(d_series),
        }
    }

    /// Schroder walks: like Motzkin with components `Z Seq(Z)^2`;
    /// `rho = 3 - 2 sqrt(2)`, `B(rho) = 1/4`, `mu = sqrt(2)`,
    /// `sigma^2 = 1/2`.
    pub fn schroder() -> SchemeSpec {
        let sqrt2 = sqrt2_rational(45);
        let rho = big(3) - big(2) * &sqrt2;
        let d_at_rho = (&sqrt2 + big(1)) / big(2);
        SchemeSpec {
            id: SchemeId::Schroder,
            rho: rho.to_f64().unwrap(),
            rho_rational: rho,
            b_at_rho: 0.25,
            b_at_rho_rational: Some(ratio(1, 4)),
            d_at_rho: Some(d_at_rho.to_f64().unwrap()),
            d_at_rho_rational: Some(d_at_rho),
            mu: 2f64.sqrt(),
            sigma: 0.5f64.sqrt(),
            mu_rational: None,
            sigma_sq_rational: Some(ratio(1, 2)),
            s_exponent: ratio(-1, 2),
            support: Support::all_from(0),
            tau_c: None,
            expansion: None,
            weight_u: big(1),
            a_tilde_series: None,
            b_series: schroder_b_series(SERIES_ORDER),
            d_series: Some(seq_series(SERIES_ORDER, &big(1))),
        }
    }

    fn tree_scheme(
        id: SchemeId,
        a_tilde: TruncatedSeries,
        b_series: TruncatedSeries,
        rho_a: BigRational,
        tau_c: f64,
        support: Support,
        ratio_stride: usize,
    ) -> Result<SchemeSpec> {
        let est = rho_from_ratios(&a_tilde, ratio_stride).ok_or_else(|| {
            Error::NonConvergence("coefficient-ratio estimate failed".into())
        })?;
        let rho_rational = bisect_characteristic(&b_series, &rho_a, est * 0.97, est * 1.03)?;
        let rho = rho_rational.to_f64().unwrap();
        let moments = crate::series::boltzmann_moments_checked(&b_series, rho, 1e-9)?;
        Ok(SchemeSpec {
            id,
            rho,
            rho_rational,
            b_at_rho: rho_a.to_f64().unwrap(),
            b_at_rho_rational: None,
            d_at_rho: None,
            d_at_rho_rational: None,
            mu: moments.mu,
            sigma: moments.sigma,
            mu_rational: None,
            sigma_sq_rational: None,
            s_exponent: ratio(-1, 2),
            support,
            tau_c: Some(tau_c),
            expansion: None,
            weight_u: big(1),
            a_tilde_series: Some(a_tilde),
            b_series,
            d_series: None,
        })
    }

    /// Rooted unordered trees, cores = rooted labeled trees
    /// (`a_k = k^{k-1}/k!`), `B(rho) = 1/e`.
    pub fn polya() -> Result<SchemeSpec> {
        let a = solve_polya_series(SERIES_ORDER)?;
        let b = polya_b_series(&a);
        let spec = SchemeSpec::tree_scheme(
            SchemeId::Polya,
            a,
            b,
            inv_e_rational(64),
            1.0,
            Support::all_from(1),
            1,
        )?;
        spec.check_support_data()?;
        Ok(spec)
    }

    /// Unordered binary trees by leaves, cores = leaf-labeled binary trees
    /// (`a_k = (2k-3)!!/k!`), `B(rho) = 1/2`.
    pub fn phylo() -> Result<SchemeSpec> {
        let a = solve_phylo_series(SERIES_ORDER)?;
        let b = phylo_b_series(&a);
        let spec = SchemeSpec::tree_scheme(
            SchemeId::Phylo,
            a,
            b,
            ratio(1, 2),
            1.0,
            Support::all_from(1),
            1,
        )?;
        spec.check_support_data()?;
        Ok(spec)
    }

    /// Unlabeled k-ary mobiles by leaves; core sizes are `1 mod (k-1)` and
    /// `B(rho) = 1 - 1/k`.
    pub fn kary_mobile(k: usize) -> Result<SchemeSpec> {
        if k < 2 {
            return Err(Error::InvalidParameter("mobile arity must be >= 2".into()));
        }
        let a = solve_kary_mobile_series(k, SERIES_ORDER)?;
        let b = kary_mobile_b_series(&a, k);
        let support = Support {
            min: 1,
            offset: 1 % (k - 1).max(1),
            period: (k - 1).max(1),
        };
        let spec = SchemeSpec::tree_scheme(
            SchemeId::KaryMobile(k),
            a,
            b,
            ratio(1, 1) - ratio(1, k as i64),
            1.0,
            support,
            k - 1,
        )?;
        spec.check_support_data()?;
        Ok(spec)
    }

    /// Unlabeled mobiles with no unary node, by leaves;
    /// `B(rho) = 1 - ln 2` and `C(rho) = 1/2`.
    pub fn schroder_mobile() -> Result<SchemeSpec> {
        let a = solve_schroder_mobile_series(SERIES_ORDER)?;
        let b = schroder_mobile_b_series(&a);
        let rho_a = BigRational::one() - ln2_rational(80);
        let spec = SchemeSpec::tree_scheme(
            SchemeId::SchroderMobile,
            a,
            b,
            rho_a,
            0.5,
            Support::all_from(1),
            1,
        )?;
        spec.check_support_data()?;
        Ok(spec)
    }

    /// The composed-class size support (object sizes the scheme can hit).
    pub fn size_supported(&self, n: usize) -> bool {
        match self.id {
            SchemeId::Motzkin | SchemeId::Schroder => true,
            SchemeId::KaryMobile(k) => n >= 1 && (n - 1) % (k - 1) == 0,
            _ => n >= 1,
        }
    }

    /// Natural logarithm of the core count `a_k` (labeled, weighted by
    /// `delta_k = 1/k!` in the labeled setting).
    pub fn ln_core_count(&self, k: usize) -> f64 {
        use statrs::function::gamma::ln_gamma;
        match self.id {
            SchemeId::Motzkin | SchemeId::Schroder => {
                // Catalan numbers
                if k == 0 {
                    0.0
                } else {
                    ln_gamma(2.0 * k as f64 + 1.0)
                        - 2.0 * ln_gamma(k as f64 + 1.0)
                        - (1.0 + k as f64).ln()
                }
            }
            SchemeId::Polya => {
                // k^{k-1}/k!
                (k as f64 - 1.0) * (k as f64).ln() - ln_gamma(k as f64 + 1.0)
            }
            SchemeId::Phylo => {
                // (2k-3)!!/k! with (2k-3)!! = (2k-2)!/(2^{k-1} (k-1)!)
                if k == 1 {
                    0.0
                } else {
                    ln_gamma(2.0 * k as f64 - 1.0)
                        - (k as f64 - 1.0) * std::f64::consts::LN_2
                        - ln_gamma(k as f64)
                        - ln_gamma(k as f64 + 1.0)
                }
            }
            SchemeId::KaryMobile(arity) => {
                // (m+k-1)!/(m! arity^m k!) with m = (k-1)/(arity-1)
                let m = (k - 1) / (arity - 1);
                ln_gamma((m + k) as f64)
                    - ln_gamma(m as f64 + 1.0)
                    - m as f64 * (arity as f64).ln()
                    - ln_gamma(k as f64 + 1.0)
            }
            SchemeId::SchroderMobile => {
                let series = schroder_mobile_labeled_series();
                series
                    .coeff(k)
                    .to_f64()
                    .map(|v| v.ln())
                    .unwrap_or(f64::NEG_INFINITY)
            }
        }
    }

    /// Verify the support descriptor against nonzero core counts for
    /// k <= 20 (construction-time sanity check).
    fn check_support_data(&self) -> Result<()> {
        for k in 0..=20usize {
            let declared = self.support.contains(k);
            let actual = match self.id {
                SchemeId::Motzkin | SchemeId::Schroder => true,
                SchemeId::Polya | SchemeId::Phylo | SchemeId::SchroderMobile => k >= 1,
                SchemeId::KaryMobile(arity) => k >= 1 && (k - 1) % (arity - 1) == 0,
            };
            if declared != actual {
                return Err(Error::InvalidParameter(format!(
                    "support descriptor mismatch at k={k} for {}",
                    self.id.name()
                )));
            }
        }
        Ok(())
    }

    /// Exact per-trial success probabilities `q_0..q_{n_max}`; available when
    /// the scheme's `rho`, `B(rho)` (and `D(rho)`) are rational.
    pub fn q_exact(&self, n_max: usize) -> Option<Vec<BigRational>> {
        let b_rho = self.b_at_rho_rational.as_ref()?;
        if self.rho_rational.denom().bits() > 128 {
            return None; // rho itself is a 200-bit approximation, not exact
        }
        let b = if self.b_series.order() >= n_max {
            self.b_series.clone()
        } else {
            match self.id {
                SchemeId::Motzkin => motzkin_b_series(n_max, &self.weight_u),
                SchemeId::Schroder => schroder_b_series(n_max),
                _ => return None,
            }
        };
        let d = self.d_series.as_ref().map(|_| seq_series(n_max, &self.weight_u));
        Some(q_series_exact(
            &b,
            d.as_ref(),
            &self.rho_rational,
            b_rho,
            self.d_at_rho_rational.as_ref(),
            n_max,
        ))
    }

    /// Float-path success probabilities for any scheme.
    pub fn q_f64(&self, n_max: usize) -> Vec<f64> {
        let b = self.extended_b_series(n_max);
        let b_rho = self
            .b_at_rho_rational
            .clone()
            .unwrap_or_else(|| rational_approx(self.b_at_rho));
        let u = scaled_coeffs_f64(&b, &self.rho_rational, &b_rho);
        let v = self.d_series.as_ref().map(|_| {
            let d = seq_series(n_max, &self.weight_u);
            scaled_coeffs_f64(
                &d,
                &self.rho_rational,
                self.d_at_rho_rational
                    .as_ref()
                    .expect("walk schemes carry exact D(rho)"),
            )
        });
        q_series_f64(&u, v.as_deref(), n_max)
    }

    /// The component series extended to at least order `n`.
    pub fn extended_b_series(&self, n: usize) -> TruncatedSeries {
        if self.b_series.order() >= n {
            return self.b_series.clone();
        }
        match self.id {
            SchemeId::Motzkin => motzkin_b_series(n, &self.weight_u),
            SchemeId::Schroder => schroder_b_series(n),
            SchemeId::Polya => {
                let a = solve_polya_series(n).expect("series solve");
                polya_b_series(&a)
            }
            SchemeId::Phylo => {
                let a = solve_phylo_series(n).expect("series solve");
                phylo_b_series(&a)
            }
            SchemeId::KaryMobile(k) => {
                let a = solve_kary_mobile_series(k, n).expect("series solve");
                kary_mobile_b_series(&a, k)
            }
            SchemeId::SchroderMobile => {
                let a = solve_schroder_mobile_series(n).expect("series solve");
                schroder_mobile_b_series(&a)
            }
        }
    }

    /// The unlabeled composed-class series extended to order `n`.
    pub fn extended_a_tilde(&self, n: usize) -> Option<TruncatedSeries> {
        match self.id {
            SchemeId::Polya => Some(solve_polya_series(n).expect("series solve")),
            SchemeId::Phylo => Some(solve_phylo_series(n).expect("series solve")),
            SchemeId::KaryMobile(k) => Some(solve_kary_mobile_series(k, n).expect("series solve")),
            SchemeId::SchroderMobile => {
                Some(solve_schroder_mobile_series(n).expect("series solve"))
            }
            _ => None,
        }
    }
}

fn rational_approx(x: f64) -> BigRational {
    BigRational::new(
        BigInt::from((x * 1e15) as i128),
        BigInt::from(1_000_000_000_000_000i64),
    )
}

/// Labeled Schroder-mobile counting EGF to order 24, solved from its
/// defining equation (used for support checks and small-size oracles).
pub fn schroder_mobile_labeled_series() -> &'static TruncatedSeries {
    use std::sync::OnceLock;
    static SERIES: OnceLock<TruncatedSeries> = OnceLock::new();
    SERIES.get_or_init(|| {
        solve_fixed_point(24, |s| {
            TruncatedSeries::z(24)
                .add(&s.log_inv_one_minus())
                .sub(s)
        })
        .expect("labeled mobile series")
    })
}

/// First asymptotic-expansion coefficient `c1` of the Motzkin counting
/// sequence (`c_n = rho^{-n} n^{-3/2} kappa (1 + c1/n + ...)`), obtained by
/// Richardson extrapolation of the exact sequence.
pub fn motzkin_c1() -> f64 {
    use std::sync::OnceLock;
    static C1: OnceLock<f64> = OnceLock::new();
    *C1.get_or_init(|| {
        let counts = motzkin_numbers(4200);
        expansion_c1(&counts, 3)
    })
}

/// Motzkin numbers up to `n_max` via
/// `(n+3) M_{n+1} = (2n+3) M_n + 3n M_{n-1}`.
pub fn motzkin_numbers(n_max: usize) -> Vec<BigInt> {
    let mut m = Vec::with_capacity(n_max + 1);
    m.push(BigInt::one());
    if n_max >= 1 {
        m.push(BigInt::one());
    }
    for n in 1..n_max {
        let next = (BigInt::from(2 * n as u64 + 3) * &m[n] + BigInt::from(3 * n as u64) * &m[n - 1])
            / BigInt::from(n as u64 + 3);
        m.push(next);
    }
    m
}

/// Catalan numbers up to `n_max`.
pub fn catalan_numbers(n_max: usize) -> Vec<BigInt> {
    let mut c = Vec::with_capacity(n_max + 1);
    c.push(BigInt::one());
    for k in 0..n_max {
        // C_{k+1} = C_k * 2(2k+1)/(k+2)
        let next = (&c[k] * BigInt::from(2 * (2 * k as u64 + 1))) / BigInt::from(k as u64 + 2);
        c.push(next);
    }
    c
}

/// Extract `c1` from `u_n = c_n growth^{-n} n^{3/2}`, which tends to
/// `kappa (1 + c1/n + ...)`: the sequence `n (u_n/u_lim - 1)` is Richardson-
/// extrapolated. `u_lim` itself comes from one extrapolation round.
fn expansion_c1(counts: &[BigInt], growth: u32) -> f64 {
    let n_max = counts.len() - 1;
    // u_n = c_n growth^{-n} n^{3/2} = kappa (1 + c1/n + ...), computed as an
    // exact rational so the only float error is one rounding
    let u = |n: usize| -> f64 {
        let r = BigRational::new(counts[n].clone(), BigInt::from(growth).pow(n as u32));
        r.to_f64().unwrap() * (n as f64).powf(1.5)
    };
    // v_n = 2n (u_n/u_{2n} - 1) = c1 + O(1/n); kappa cancels exactly
    let top = n_max / 2;
    let step = (top / 14).max(1);
    let pts: Vec<usize> = (0..8).map(|i| top - step * (7 - i)).collect();
    let idx: Vec<f64> = pts.iter().map(|&n| n as f64).collect();
    let vals: Vec<f64> = pts
        .iter()
        .map(|&n| 2.0 * n as f64 * (u(n) / u(2 * n) - 1.0))
        .collect();
    crate::series::richardson(&idx, &vals, 2).expect("c1 extrapolation")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::boltzmann_moments;

    #[test]
    fn motzkin_constants() {
        let s = SchemeSpec::motzkin();
        assert_eq!(s.rho_rational, ratio(1, 3));
        assert_eq!(s.mu_rational, Some(big(3)));
        assert_eq!(s.sigma_sq_rational, Some(ratio(3, 2)));
        assert_eq!(s.d_at_rho_rational, Some(ratio(3, 2)));
        assert!(s.support.contains(0));
        // series-based moments agree with the closed forms
        let m = boltzmann_moments(&s.b_series, s.rho).unwrap();
        assert!((m.mu - 3.0).abs() < 1e-9);
        assert!((m.sigma * m.sigma - 1.5).abs() < 1e-8);
    }

    #[test]
    fn weighted_motzkin_constants() {
        let s = SchemeSpec::motzkin_weighted(big(2));
        assert_eq!(s.rho_rational, ratio(1, 4));
        assert_eq!(s.mu_rational, Some(big(4)));
        assert_eq!(s.sigma_sq_rational, Some(big(4)));
        let m = boltzmann_moments(&s.b_series, 0.25).unwrap();
        assert!((m.mu - 4.0).abs() < 1e-9);
        assert!((m.value - 0.25).abs() < 1e-12);
    }

    #[test]
    fn schroder_constants() {
        let s = SchemeSpec::schroder();
        assert!((s.rho - (3.0 - 2.0 * 2f64.sqrt())).abs() < 1e-15);
        let m = boltzmann_moments(&s.b_series, s.rho).unwrap();
        assert!((m.mu - 2f64.sqrt()).abs() < 1e-10);
        assert!((m.sigma * m.sigma - 0.5).abs() < 1e-9);
        assert!((m.value - 0.25).abs() < 1e-12);
    }

    #[test]
    fn polya_singularity_to_high_precision() {
        let s = SchemeSpec::polya().unwrap();
        // known digits of the tree growth constant's reciprocal
        assert!(
            (s.rho - 0.338_321_856_899_207_7).abs() < 1e-13,
            "rho = {}",
            s.rho
        );
        // residual of the characteristic equation at the stored rational
        let b_val = s.b_series.eval_rational(&s.rho_rational);
        let resid = (&b_val - inv_e_rational(64)).to_f64().unwrap().abs();
        assert!(resid < 1e-30, "residual {resid}");
        assert!(s.mu > 1.0 && s.mu < 2.0, "mu = {}", s.mu);
        assert!(s.sigma > 0.0);
    }

    #[test]
    fn phylo_singularity_to_high_precision() {
        let s = SchemeSpec::phylo().unwrap();
        assert!(
            (s.rho - 0.402_697_503_671_441_3).abs() < 1e-13,
            "rho = {}",
            s.rho
        );
        let b_val = s.b_series.eval_rational(&s.rho_rational);
        let resid = (&b_val - ratio(1, 2)).to_f64().unwrap().abs();
        assert!(resid < 1e-30);
    }

    #[test]
    fn mobile_schemes_construct() {
        let t = SchemeSpec::kary_mobile(3).unwrap();
        assert!(t.support.contains(1) && t.support.contains(3) && !t.support.contains(2));
        assert!(t.size_supported(7) && !t.size_supported(6));
        assert!(t.rho > 0.3 && t.rho < 0.9, "rho = {}", t.rho);
        let resid = (t.b_series.eval_rational(&t.rho_rational) - ratio(2, 3))
            .to_f64()
            .unwrap()
            .abs();
        assert!(resid < 1e-30);

        let s = SchemeSpec::schroder_mobile().unwrap();
        assert!(s.rho > 0.2 && s.rho < 0.9, "rho = {}", s.rho);
        let target = BigRational::one() - ln2_rational(80);
        let resid = (s.b_series.eval_rational(&s.rho_rational) - target)
            .to_f64()
            .unwrap()
            .abs();
        assert!(resid < 1e-30);
    }

    #[test]
    fn exact_q_limits() {
        let s = SchemeSpec::motzkin();
        let q = s.q_exact(400).unwrap();
        let third = ratio(1, 3);
        let diff = (&q[400] - &third).to_f64().unwrap().abs();
        assert!(diff < 1e-100);
        // float path matches
        let qf = s.q_f64(200);
        for n in 0..=200 {
            assert!((qf[n] - q[n].to_f64().unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn catalan_and_motzkin_sequences() {
        let c = catalan_numbers(10);
        assert_eq!(c[5], BigInt::from(42));
        let m = motzkin_numbers(10);
        let want = [1u64, 1, 2, 4, 9, 21, 51, 127, 323, 835, 2188];
        for (i, w) in want.iter().enumerate() {
            assert_eq!(m[i], BigInt::from(*w));
        }
    }

    #[test]
    fn catalan_expansion_coefficient_stabilizes() {
        // a1 = -9/8 for the Catalan sequence, recovered to 6 digits
        let c = catalan_numbers(4200);
        let a1 = expansion_c1(&c, 4);
        assert!((a1 - (-1.125)).abs() < 1e-6, "a1 = {a1}");
    }

    #[test]
    fn motzkin_c1_is_stable() {
        let c1 = motzkin_c1();
        let counts = motzkin_numbers(2600);
        let c1_smaller = expansion_c1(&counts, 3);
        assert!(
            (c1 - c1_smaller).abs() < 1e-5,
            "c1 = {c1} vs {c1_smaller} on a shorter window"
        );
    }

    #[test]
    fn scheme_names_roundtrip() {
        for name in ["motzkin", "schroder", "polya", "phylo", "mobile:3", "schroder-mobile"] {
            assert_eq!(SchemeId::parse(name).unwrap().name(), name);
        }
        assert!(SchemeId::parse("mobile:1").is_err());
        assert!(SchemeId::parse("nope").is_err());
    }
}
