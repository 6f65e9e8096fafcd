//! Exact computation of counting coefficients, distortion factors,
//! total-variation distances (plain and rejection-accelerated) and the exact
//! Motzkin height law. Everything here is the ground truth the samplers are
//! tested against.
//!
//! Two arithmetic paths exist: exact big-rationals (walk schemes with
//! rational singularity data) and a self-normalizing log-space float path
//! that works for every scheme and is validated against the rational path on
//! an overlap window.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::scheme::{catalan_numbers, SchemeId, SchemeSpec};
use crate::series::{big, scaled_coeffs_f64};

/// Exact-rational probability law over an integer index (core-size or
/// height) at a fixed size.
#[derive(Clone, Debug)]
pub struct ExactDist {
    pub n: usize,
    pub probs: BTreeMap<usize, BigRational>,
}

impl ExactDist {
    pub fn total(&self) -> BigRational {
        let mut s = BigRational::zero();
        for p in self.probs.values() {
            s += p;
        }
        s
    }

    pub fn to_f64(&self) -> FloatDist {
        FloatDist {
            n: self.n,
            probs: self
                .probs
                .iter()
                .map(|(k, p)| (*k, p.to_f64().unwrap_or(0.0)))
                .collect(),
        }
    }
}

/// Float probability law, normalized to 1 up to rounding.
#[derive(Clone, Debug)]
pub struct FloatDist {
    pub n: usize,
    pub probs: BTreeMap<usize, f64>,
}

impl FloatDist {
    pub fn prob(&self, k: usize) -> f64 {
        self.probs.get(&k).copied().unwrap_or(0.0)
    }

    /// Total variation distance to an empirical histogram of counts.
    pub fn tv_to_counts(&self, counts: &BTreeMap<i64, u64>, total: u64) -> f64 {
        let mut keys: Vec<usize> = self.probs.keys().copied().collect();
        keys.extend(counts.keys().filter(|k| **k >= 0).map(|k| *k as usize));
        keys.sort_unstable();
        keys.dedup();
        let mut acc = 0.0;
        for k in keys {
            let emp = counts.get(&(k as i64)).copied().unwrap_or(0) as f64 / total as f64;
            acc += (self.prob(k) - emp).abs();
        }
        acc / 2.0
    }
}

/// Which sampled law to analyse.
#[derive(Clone, Debug, PartialEq)]
pub enum LawKind {
    Uniform,
    Leap,
    Rej { r: u8, a: BigRational },
}

/// Joint counting table at one size: `c_{n,k}` over core sizes, the row sum
/// `c_n` and the core counts `a_k`.
#[derive(Clone, Debug)]
pub struct CountTable {
    pub id: SchemeId,
    pub n: usize,
    pub c_nk: Vec<BigInt>,
    pub c_n: BigInt,
    pub a_k: Vec<BigInt>,
}

/// `c_{n,k} = Cat_k binom(n, 2k)` for Motzkin walks of length n.
pub fn motzkin_counts(n: usize) -> CountTable {
    let kmax = n / 2;
    let cat = catalan_numbers(kmax);
    let mut c_nk = Vec::with_capacity(kmax + 1);
    // binom(n, 2k) via the multiplicative recurrence
    let mut binom = BigInt::one();
    for k in 0..=kmax {
        if k > 0 {
            let a = BigInt::from((n - 2 * k + 2) as u64) * BigInt::from((n - 2 * k + 1) as u64);
            let b = BigInt::from((2 * k - 1) as u64) * BigInt::from((2 * k) as u64);
            binom = binom * a / b;
        }
        c_nk.push(&cat[k] * &binom);
    }
    let c_n = c_nk.iter().sum();
    CountTable {
        id: SchemeId::Motzkin,
        n,
        c_nk,
        c_n,
        a_k: cat,
    }
}

/// `c_{n,k} = Cat_k binom(n+k, 2k)` for Schroder walks of size n.
pub fn schroder_counts(n: usize) -> CountTable {
    let kmax = n;
    let cat = catalan_numbers(kmax);
    let mut c_nk = Vec::with_capacity(kmax + 1);
    let mut binom = BigInt::one(); // binom(n+k, 2k)
    for k in 0..=kmax {
        if k > 0 {
            // binom(n+k, 2k) = binom(n+k-1, 2k-2) * (n+k)(n-k+1) / ((2k-1) 2k)
            let a = BigInt::from((n + k) as u64) * BigInt::from((n - k + 1) as u64);
            let b = BigInt::from((2 * k - 1) as u64) * BigInt::from((2 * k) as u64);
            binom = binom * a / b;
        }
        c_nk.push(&cat[k] * &binom);
    }
    let c_n = c_nk.iter().sum();
    CountTable {
        id: SchemeId::Schroder,
        n,
        c_nk,
        c_n,
        a_k: cat,
    }
}

pub fn count_table(id: SchemeId, n: usize) -> Result<CountTable> {
    match id {
        SchemeId::Motzkin => Ok(motzkin_counts(n)),
        SchemeId::Schroder => Ok(schroder_counts(n)),
        _ => Err(Error::InvalidParameter(format!(
            "closed-form count tables exist only for walk schemes, not {}",
            id.name()
        ))),
    }
}

// ---------------------------------------------------------------------------
// Exact rational path (walk schemes with rational singularity data).
// ---------------------------------------------------------------------------

/// Exact analytics for a walk scheme: success probabilities, distortion
/// factors, core-size laws and total-variation distances in big-rational
/// arithmetic.
pub struct WalkExact {
    pub spec: SchemeSpec,
    pub q: Vec<BigRational>,
    n_max: usize,
}

impl WalkExact {
    pub fn new(spec: &SchemeSpec, n_max: usize) -> Result<WalkExact> {
        let q = spec.q_exact(n_max).ok_or_else(|| {
            Error::InvalidParameter(format!(
                "scheme {} has no exact rational path",
                spec.id.name()
            ))
        })?;
        Ok(WalkExact {
            spec: spec.clone(),
            q,
            n_max,
        })
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn q_n(&self, n: usize) -> &BigRational {
        &self.q[n]
    }

    /// Distortion factor `d_{n,k} = c_n rho^n / (q_n D(rho) a_k B(rho)^k)`.
    pub fn distortion(&self, table: &CountTable, k: usize) -> BigRational {
        let n = table.n;
        assert!(n <= self.n_max);
        let rho_n = pow_rational(&self.spec.rho_rational, n);
        let b_rho_k = pow_rational(self.spec.b_at_rho_rational.as_ref().unwrap(), k);
        let d_rho = self
            .spec
            .d_at_rho_rational
            .clone()
            .unwrap_or_else(BigRational::one);
        let c_n = BigRational::from_integer(table.c_n.clone());
        let a_k = BigRational::from_integer(table.a_k[k].clone());
        c_n * rho_n / (&self.q[n] * d_rho * a_k * b_rho_k)
    }

    /// Exact core-size law under the chosen generator.
    pub fn core_law(&self, n: usize, kind: &LawKind) -> Result<ExactDist> {
        let table = count_table(self.spec.id, n)?;
        let c_n = BigRational::from_integer(table.c_n.clone());
        let mut probs = BTreeMap::new();
        match kind {
            LawKind::Uniform => {
                for (k, c) in table.c_nk.iter().enumerate() {
                    if !c.is_zero() {
                        probs.insert(k, BigRational::from_integer(c.clone()) / &c_n);
                    }
                }
            }
            LawKind::Leap => {
                for (k, c) in table.c_nk.iter().enumerate() {
                    if !c.is_zero() {
                        let pi = BigRational::from_integer(c.clone()) / &c_n;
                        probs.insert(k, pi * self.distortion(&table, k));
                    }
                }
            }
            LawKind::Rej { r, a } => {
                let mut terms = Vec::new();
                let mut w_sum = BigRational::zero();
                for (k, c) in table.c_nk.iter().enumerate() {
                    if c.is_zero() {
                        continue;
                    }
                    let pi = BigRational::from_integer(c.clone()) / &c_n;
                    let d = self.distortion(&table, k);
                    let w = self.rejection_weight_rational(*r, a, n, k)?;
                    let t = &pi * &d * &w;
                    w_sum += &t;
                    terms.push((k, t));
                }
                for (k, t) in terms {
                    probs.insert(k, t / &w_sum);
                }
            }
        }
        Ok(ExactDist { n, probs })
    }

    /// Exact rational rejection weight. The expansion polynomials collapse
    /// to rationals through `tau = (mu k - n)/sqrt(n)`: every term pairs a
    /// power of tau with a half-integer power of n of matching parity.
    pub fn rejection_weight_rational(
        &self,
        r: u8,
        a: &BigRational,
        n: usize,
        k: usize,
    ) -> Result<BigRational> {
        let y = self.y_poly_rational(r, n, k)?;
        Ok(if y >= *a { a / &y } else { BigRational::one() })
    }

    pub fn y_poly_rational(&self, r: u8, n: usize, k: usize) -> Result<BigRational> {
        let mu = self.spec.mu_rational.clone().ok_or_else(|| {
            Error::InvalidParameter("rational rejection weights need rational mu".into())
        })?;
        if r > 3 {
            return Err(Error::InvalidParameter(
                "acceleration order above 3 unsupported".into(),
            ));
        }
        let s = self.spec.s_exponent.clone();
        let one = BigRational::one();
        let n_r = big(n as i64);
        let tau_num = &mu * big(k as i64) - &n_r; // mu k - n
        let mut y = one.clone();
        if r >= 1 {
            // p1 n^{-1/2} = -(s-1)(mu k - n)/n
            y += -(&s - &one) * &tau_num / &n_r;
        }
        if r >= 2 {
            let (a1, c1) = self.spec.expansion.ok_or(Error::MissingExpansion {
                r,
                class: self.spec.id.name(),
            })?;
            let a1 = rational_from_f64(a1);
            let c1 = rational_from_f64(c1);
            let tau2 = &tau_num * &tau_num;
            y += (&s - &one) * &s / big(2) * &tau2 / (&n_r * &n_r) + (&c1 - &a1 * &mu) / &n_r;
            if r >= 3 {
                let tau3 = &tau2 * &tau_num;
                let n2 = &n_r * &n_r;
                let n3 = &n2 * &n_r;
                y += &s * (&one - &s * &s) / big(6) * tau3 / n3
                    + (&s * &mu * &a1 - (&s - &one) * &c1) * &tau_num / n2;
            }
        }
        Ok(y)
    }

    /// `d_TV(pi_n, pi'_n) = 1/2 sum_k (c_{n,k}/c_n) |1 - d_{n,k}|`, exact.
    pub fn tv_exact(&self, n: usize) -> BigRational {
        let table = count_table(self.spec.id, n).expect("walk scheme");
        let c_n = BigRational::from_integer(table.c_n.clone());
        let mut acc = BigRational::zero();
        for (k, c) in table.c_nk.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let pi = BigRational::from_integer(c.clone()) / &c_n;
            let dev = BigRational::one() - self.distortion(&table, k);
            acc += pi * dev.abs();
        }
        acc / big(2)
    }

    /// `d_TV(pi_n, pi^rej_n)` with the weight rule at order `r` and target
    /// acceptance `a`; exact for r <= 1 (the weights are rational), while
    /// r >= 2 carries the extrapolated expansion constants as their binary64
    /// rational images.
    pub fn tv_rej_exact(&self, n: usize, r: u8, a: &BigRational) -> Result<BigRational> {
        let law = self.core_law(n, &LawKind::Rej { r, a: a.clone() })?;
        let uniform = self.core_law(n, &LawKind::Uniform)?;
        let mut acc = BigRational::zero();
        for (k, p) in &uniform.probs {
            let q = law.probs.get(k).cloned().unwrap_or_else(BigRational::zero);
            acc += (p - q).abs();
        }
        Ok(acc / big(2))
    }
}

fn pow_rational(x: &BigRational, k: usize) -> BigRational {
    let mut acc = BigRational::one();
    let mut base = x.clone();
    let mut e = k;
    while e > 0 {
        if e & 1 == 1 {
            acc *= &base;
        }
        base = &base * &base;
        e >>= 1;
    }
    acc
}

pub fn rational_from_f64(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite float")
}

// ---------------------------------------------------------------------------
// Float path (all schemes): self-normalizing ratio recursions.
// ---------------------------------------------------------------------------

/// Log-weights of the uniform core-size law `c_{n,k}/c_n` for the walk
/// schemes, via exact per-step count ratios.
fn walk_log_weights(id: SchemeId, n: usize) -> Vec<f64> {
    let kmax = match id {
        SchemeId::Motzkin => n / 2,
        SchemeId::Schroder => n,
        _ => unreachable!(),
    };
    let mut lw = Vec::with_capacity(kmax + 1);
    lw.push(0.0f64);
    for k in 0..kmax {
        let step = match id {
            SchemeId::Motzkin => {
                // c_{n,k+1}/c_{n,k} = (n-2k)(n-2k-1)/((k+1)(k+2))
                (n - 2 * k) as f64 * (n - 2 * k - 1) as f64 / ((k + 1) as f64 * (k + 2) as f64)
            }
            SchemeId::Schroder => {
                // c_{n,k+1}/c_{n,k} = (n+k+1)(n-k)/((k+1)(k+2))
                (n + k + 1) as f64 * (n - k) as f64 / ((k + 1) as f64 * (k + 2) as f64)
            }
            _ => unreachable!(),
        };
        lw.push(lw[k] + step.ln());
    }
    lw
}

/// Log of the unnormalized distortion `1/(a_k B(rho)^k)`; the absolute
/// normalization is fixed downstream by `sum_k pi(k) d(k) = 1`, which the
/// exact identity guarantees.
fn walk_log_distortion(spec: &SchemeSpec, kmax: usize) -> Vec<f64> {
    let mut ld = Vec::with_capacity(kmax + 1);
    ld.push(0.0f64);
    let ln_b = spec.b_at_rho.ln();
    for k in 0..kmax {
        // a_{k+1}/a_k = 2(2k+1)/(k+2) for Catalan cores
        let cat_step = 2.0 * (2 * k + 1) as f64 / (k + 2) as f64;
        ld.push(ld[k] - cat_step.ln() - ln_b);
    }
    ld
}

/// Float-path core-size law for the walk schemes at any size.
pub fn walk_core_law_f64(spec: &SchemeSpec, n: usize, kind: &LawKind) -> FloatDist {
    let lw = walk_log_weights(spec.id, n);
    let kmax = lw.len() - 1;
    let max_lw = lw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut pi: Vec<f64> = lw.iter().map(|l| (l - max_lw).exp()).collect();
    let total: f64 = kahan_sum(&pi);
    for p in pi.iter_mut() {
        *p /= total;
    }
    let probs = match kind {
        LawKind::Uniform => pi.clone(),
        _ => {
            let ld = walk_log_distortion(spec, kmax);
            // scale relative to the mode of pi for stability, then normalize
            // by the exact identity sum pi d = 1
            let kmode = pi
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0;
            let mut d: Vec<f64> = Vec::with_capacity(kmax + 1);
            for k in 0..=kmax {
                d.push((ld[k] - ld[kmode]).exp());
            }
            let norm: f64 = kahan_sum(
                &pi.iter()
                    .zip(d.iter())
                    .map(|(p, dd)| p * dd)
                    .collect::<Vec<_>>(),
            );
            for dd in d.iter_mut() {
                *dd /= norm;
            }
            match kind {
                LawKind::Leap => pi.iter().zip(d.iter()).map(|(p, dd)| p * dd).collect(),
                LawKind::Rej { r, a } => {
                    let a = a.to_f64().unwrap();
                    let mut w = Vec::with_capacity(kmax + 1);
                    for k in 0..=kmax {
                        w.push(
                            crate::leap::rejection_weight(spec, *r, a, n, k)
                                .expect("rejection weight"),
                        );
                    }
                    let terms: Vec<f64> = (0..=kmax).map(|k| pi[k] * d[k] * w[k]).collect();
                    let wn = kahan_sum(&terms);
                    terms.iter().map(|t| t / wn).collect()
                }
                LawKind::Uniform => unreachable!(),
            }
        }
    };
    let mut map = BTreeMap::new();
    for (k, p) in probs.iter().enumerate() {
        if *p > 0.0 {
            map.insert(k, *p);
        }
    }
    FloatDist { n, probs: map }
}

/// Float-path total variation distance between the uniform law and the
/// chosen generator law (walk schemes).
pub fn walk_tv_f64(spec: &SchemeSpec, n: usize, kind: &LawKind) -> f64 {
    let uni = walk_core_law_f64(spec, n, &LawKind::Uniform);
    let other = walk_core_law_f64(spec, n, kind);
    let terms: Vec<f64> = uni
        .probs
        .iter()
        .map(|(k, p)| (p - other.prob(*k)).abs())
        .collect();
    kahan_sum(&terms) / 2.0
}

fn kahan_sum(xs: &[f64]) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for &x in xs {
        let y = x - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    sum
}

// ---------------------------------------------------------------------------
// Generic core-size laws (tree schemes), float path.
// ---------------------------------------------------------------------------

pub const GENERIC_CORE_LAW_MAX_N: usize = 600;

/// Core-size law of the composed class at size `n`, under the uniform, leap,
/// or rejection law. For tree schemes the joint counts come from powers of
/// the scaled component series (`c_{n,k} = a_k [z^n] B^k`), costing O(n^3);
/// normalization error stays far below 1e-9.
pub fn generic_core_law(spec: &SchemeSpec, n: usize, kind: &LawKind) -> Result<FloatDist> {
    if spec.id.is_walk() {
        return Ok(walk_core_law_f64(spec, n, kind));
    }
    if n > GENERIC_CORE_LAW_MAX_N {
        return Err(Error::InvalidParameter(format!(
            "generic core law limited to n <= {GENERIC_CORE_LAW_MAX_N} (O(n^3) series powers), got {n}"
        )));
    }
    let b = spec.extended_b_series(n);
    let b_rho = spec
        .b_at_rho_rational
        .clone()
        .unwrap_or_else(|| rational_from_f64(spec.b_at_rho));
    // u_i = b_i rho^i / B(rho); P(Z_k = n) = [z^n] u(z)^k
    let u = scaled_coeffs_f64(&b, &spec.rho_rational, &b_rho);
    let ln_b_rho = spec.b_at_rho.ln();
    let mut lnw: Vec<(usize, f64)> = Vec::new(); // (k, ln of unnormalized pi)
    let mut power = vec![0.0f64; n + 1];
    power[0] = 1.0;
    for k in 1..=n {
        let mut next = vec![0.0f64; n + 1];
        for i in 0..=n {
            let pi = power[i];
            if pi == 0.0 {
                continue;
            }
            for (j, uj) in u.iter().enumerate().take(n + 1 - i).skip(1) {
                if *uj != 0.0 {
                    next[i + j] += pi * uj;
                }
            }
        }
        power = next;
        let p_zk = power[n];
        if p_zk > 0.0 && spec.support.contains(k) {
            let ln_pi = spec.ln_core_count(k) + k as f64 * ln_b_rho + p_zk.ln();
            lnw.push((k, ln_pi));
        }
    }
    if lnw.is_empty() {
        return Err(Error::UnsupportedSize {
            class: spec.id.name(),
            n,
            detail: "no core size can realize this object size".into(),
        });
    }
    let max_ln = lnw.iter().map(|(_, l)| *l).fold(f64::NEG_INFINITY, f64::max);
    let mut pi: Vec<(usize, f64)> = lnw.iter().map(|(k, l)| (*k, (l - max_ln).exp())).collect();
    let total: f64 = kahan_sum(&pi.iter().map(|(_, p)| *p).collect::<Vec<_>>());
    for (_, p) in pi.iter_mut() {
        *p /= total;
    }
    let final_probs: Vec<(usize, f64)> = match kind {
        LawKind::Uniform => pi,
        _ => {
            let kmode = pi
                .iter()
                .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
                .unwrap()
                .0;
            let ref_ln = spec.ln_core_count(kmode) + kmode as f64 * ln_b_rho;
            let d: Vec<f64> = pi
                .iter()
                .map(|(k, _)| (ref_ln - spec.ln_core_count(*k) - *k as f64 * ln_b_rho).exp())
                .collect();
            let norm = kahan_sum(
                &pi.iter()
                    .zip(d.iter())
                    .map(|((_, p), dd)| p * dd)
                    .collect::<Vec<_>>(),
            );
            match kind {
                LawKind::Leap => pi
                    .iter()
                    .zip(d.iter())
                    .map(|((k, p), dd)| (*k, p * dd / norm))
                    .collect(),
                LawKind::Rej { r, a } => {
                    let a = a.to_f64().unwrap();
                    let terms: Vec<(usize, f64)> = pi
                        .iter()
                        .zip(d.iter())
                        .map(|((k, p), dd)| {
                            let w = crate::leap::rejection_weight(spec, *r, a, n, *k)
                                .expect("rejection weight");
                            (*k, p * dd / norm * w)
                        })
                        .collect();
                    let wn = kahan_sum(&terms.iter().map(|(_, t)| *t).collect::<Vec<_>>());
                    terms.into_iter().map(|(k, t)| (k, t / wn)).collect()
                }
                LawKind::Uniform => unreachable!(),
            }
        }
    };
    let mut map = BTreeMap::new();
    for (k, p) in final_probs {
        if p > 0.0 {
            map.insert(k, p);
        }
    }
    Ok(FloatDist { n, probs: map })
}

// ---------------------------------------------------------------------------
// Dyck height tables and the exact Motzkin height law.
// ---------------------------------------------------------------------------

/// `a_{k,h}` = number of Dyck walks of semilength k and height exactly h,
/// built from the bounded-height counting series `W_h = 1/(1 - z W_{h-1})`.
pub struct DyckHeightTable {
    pub k_max: usize,
    /// rows[k][h] for 0 <= h <= k
    rows: Vec<Vec<BigInt>>,
    pub catalan: Vec<BigInt>,
}

impl DyckHeightTable {
    pub fn count(&self, k: usize, h: usize) -> &BigInt {
        &self.rows[k][h.min(self.rows[k].len() - 1)]
    }

    fn raw(&self, k: usize, h: usize) -> Option<&BigInt> {
        self.rows.get(k).and_then(|r| r.get(h))
    }
}

pub fn dyck_height_table(k_max: usize) -> DyckHeightTable {
    let catalan = catalan_numbers(k_max);
    let mut rows: Vec<Vec<BigInt>> = (0..=k_max)
        .map(|k| vec![BigInt::zero(); k + 1])
        .collect();
    rows[0][0] = BigInt::one();
    if k_max == 0 {
        return DyckHeightTable {
            k_max,
            rows,
            catalan,
        };
    }
    let mut w_prev = vec![BigInt::zero(); k_max + 1];
    w_prev[0] = BigInt::one(); // W_0 = 1
    for h in 1..=k_max {
        // W_h = 1/(1 - z W_{h-1}): w[m] = sum_{j<m} w_prev[j] w[m-1-j]
        let mut w = vec![BigInt::zero(); k_max + 1];
        w[0] = BigInt::one();
        for m in 1..=k_max {
            let mut acc = BigInt::zero();
            for j in 0..m {
                if !w_prev[j].is_zero() && !w[m - 1 - j].is_zero() {
                    acc += &w_prev[j] * &w[m - 1 - j];
                }
            }
            w[m] = acc;
        }
        for k in h..=k_max {
            rows[k][h] = &w[k] - &w_prev[k];
        }
        w_prev = w;
    }
    DyckHeightTable {
        k_max,
        rows,
        catalan,
    }
}

/// Exact height law of Motzkin walks of length `n` under the chosen
/// generator: the walk height equals its Dyck-core height, so
/// `pi_hat(h) = sum_k P(core = k) a_{k,h}/Cat_k`.
pub fn height_law(
    we: &WalkExact,
    ht: &DyckHeightTable,
    n: usize,
    kind: &LawKind,
) -> Result<ExactDist> {
    assert_eq!(we.spec.id, SchemeId::Motzkin, "height law is Motzkin-only");
    let core = we.core_law(n, kind)?;
    let kmax = n / 2;
    assert!(ht.k_max >= kmax, "height table too small");
    // v_k = P(core = k)/Cat_k
    let v: Vec<BigRational> = (0..=kmax)
        .map(|k| {
            core.probs
                .get(&k)
                .map(|p| p / BigRational::from_integer(ht.catalan[k].clone()))
                .unwrap_or_else(BigRational::zero)
        })
        .collect();
    let mut probs = BTreeMap::new();
    for h in 0..=kmax {
        let mut acc = BigRational::zero();
        for (k, vk) in v.iter().enumerate().skip(h) {
            if vk.is_zero() {
                continue;
            }
            if let Some(a) = ht.raw(k, h) {
                if !a.is_zero() {
                    acc += vk * BigRational::from_integer(a.clone());
                }
            }
        }
        if !acc.is_zero() {
            probs.insert(h, acc);
        }
    }
    Ok(ExactDist { n, probs })
}

/// Exact `d_TV` between the uniform and generator height laws at size `n`,
/// in one pass over the height table: the height-law difference at `h` is
/// `sum_k (P_u(k) - P_x(k)) a_{k,h}/Cat_k`.
pub fn tv_height(
    we: &WalkExact,
    ht: &DyckHeightTable,
    n: usize,
    kind: &LawKind,
) -> Result<BigRational> {
    let uni = we.core_law(n, &LawKind::Uniform)?;
    let other = we.core_law(n, kind)?;
    let kmax = n / 2;
    assert!(ht.k_max >= kmax, "height table too small");
    let v: Vec<BigRational> = (0..=kmax)
        .map(|k| {
            let a = uni.probs.get(&k).cloned().unwrap_or_else(BigRational::zero);
            let b = other
                .probs
                .get(&k)
                .cloned()
                .unwrap_or_else(BigRational::zero);
            (a - b) / BigRational::from_integer(ht.catalan[k].clone())
        })
        .collect();
    let mut acc = BigRational::zero();
    for h in 0..=kmax {
        let mut delta = BigRational::zero();
        for (k, vk) in v.iter().enumerate().skip(h) {
            if vk.is_zero() {
                continue;
            }
            if let Some(a) = ht.raw(k, h) {
                if !a.is_zero() {
                    delta += vk * BigRational::from_integer(a.clone());
                }
            }
        }
        acc += delta.abs();
    }
    Ok(acc / big(2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objects::{LatticeWalk, Step};
    use crate::scheme::{catalan_numbers, motzkin_numbers, SchemeSpec};
    use crate::series::ratio;

    // brute-force enumeration of Motzkin walks of length n, by core size
    fn enumerate_motzkin(n: usize) -> Vec<u64> {
        let mut by_k = vec![0u64; n / 2 + 1];
        fn go(steps: &mut Vec<Step>, n: usize, by_k: &mut [u64]) {
            if steps.len() == n {
                let w = LatticeWalk {
                    steps: steps.clone(),
                };
                if w.is_valid() {
                    by_k[w.up_count()] += 1;
                }
                return;
            }
            for s in [Step::Up, Step::Flat, Step::Down] {
                steps.push(s);
                go(steps, n, by_k);
                steps.pop();
            }
        }
        let mut steps = Vec::new();
        go(&mut steps, n, &mut by_k);
        by_k
    }

    #[test]
    fn motzkin_counts_match_enumeration_and_recurrence() {
        for n in 0..=9 {
            let t = motzkin_counts(n);
            let brute = enumerate_motzkin(n);
            for (k, c) in brute.iter().enumerate() {
                assert_eq!(t.c_nk[k], BigInt::from(*c), "n={n} k={k}");
            }
        }
        // n = 4 frozen values
        let t = motzkin_counts(4);
        assert_eq!(t.c_nk[0], BigInt::from(1u32));
        assert_eq!(t.c_nk[1], BigInt::from(6u32));
        assert_eq!(t.c_nk[2], BigInt::from(2u32));
        assert_eq!(t.c_n, BigInt::from(9u32));
        // row sums match the Motzkin recurrence for larger n
        let m = motzkin_numbers(300);
        for n in [40usize, 111, 300] {
            assert_eq!(motzkin_counts(n).c_n, m[n]);
        }
        // c_{n,0} = 1, c_{2k,k} = Cat_k
        assert_eq!(motzkin_counts(17).c_nk[0], BigInt::one());
        let t = motzkin_counts(12);
        assert_eq!(t.c_nk[6], catalan_numbers(6)[6]);
    }

    #[test]
    fn schroder_counts_match_known_sequence() {
        // large Schroder numbers 1, 2, 6, 22, 90, 394
        let want = [1u64, 2, 6, 22, 90, 394];
        for (n, w) in want.iter().enumerate() {
            assert_eq!(schroder_counts(n).c_n, BigInt::from(*w));
        }
    }

    #[test]
    fn distortion_identities_small() {
        let spec = SchemeSpec::motzkin();
        let we = WalkExact::new(&spec, 120).unwrap();
        // singleton size: d_{1,0} = 1, tv = 0
        let t1 = motzkin_counts(1);
        assert_eq!(we.distortion(&t1, 0), BigRational::one());
        assert!(we.tv_exact(1).is_zero());
        // normalization: sum_k pi(k) d = 1 exactly, and the q identity
        for n in [2usize, 3, 17, 60, 120] {
            let law = we.core_law(n, &LawKind::Leap).unwrap();
            assert_eq!(law.total(), BigRational::one(), "n={n}");
            let t = count_table(SchemeId::Motzkin, n).unwrap();
            let mut q = BigRational::zero();
            let rho_n = pow_rational(&spec.rho_rational, n);
            for (k, c) in t.c_nk.iter().enumerate() {
                let b_k = pow_rational(&ratio(1, 4), k);
                q += BigRational::from_integer(c.clone()) * &rho_n
                    / (BigRational::from_integer(t.a_k[k].clone()) * ratio(3, 2) * b_k);
            }
            assert_eq!(&q, we.q_n(n), "q identity at n={n}");
        }
    }

    #[test]
    fn distortion_increases_near_mode() {
        let spec = SchemeSpec::motzkin();
        let we = WalkExact::new(&spec, 400).unwrap();
        let t = motzkin_counts(400);
        let k0 = 400 / 3;
        let mut prev = we.distortion(&t, k0 - 10);
        for k in (k0 - 9)..=(k0 + 10) {
            let d = we.distortion(&t, k);
            assert!(d > prev, "monotonicity near the mode at k={k}");
            prev = d;
        }
    }

    #[test]
    fn rej_r0_equals_leap_law() {
        let spec = SchemeSpec::motzkin();
        let we = WalkExact::new(&spec, 60).unwrap();
        for a in [ratio(1, 2), ratio(9, 10)] {
            let rej = we.core_law(40, &LawKind::Rej { r: 0, a }).unwrap();
            let leap = we.core_law(40, &LawKind::Leap).unwrap();
            assert_eq!(rej.probs, leap.probs);
        }
        let tv = we.tv_exact(40);
        let tv_rej = we.tv_rej_exact(40, 0, &ratio(1, 3)).unwrap();
        assert_eq!(tv, tv_rej);
    }

    #[test]
    fn rational_and_float_y_agree() {
        let spec = SchemeSpec::motzkin();
        let we = WalkExact::new(&spec, 4).unwrap();
        for (n, k) in [(100usize, 30usize), (1000, 333), (1000, 360), (50, 5)] {
            for r in [1u8, 2, 3] {
                let yr = we.y_poly_rational(r, n, k).unwrap().to_f64().unwrap();
                let t = crate::leap::t_value(&spec, n, k);
                let yf = crate::leap::y_poly(&spec, r, n, t).unwrap();
                assert!(
                    (yr - yf).abs() < 1e-9 * (1.0 + yf.abs()),
                    "r={r} n={n} k={k}: {yr} vs {yf}"
                );
            }
        }
    }

    #[test]
    fn float_path_matches_rational_path_small() {
        let spec = SchemeSpec::motzkin();
        let we = WalkExact::new(&spec, 200).unwrap();
        for n in [50usize, 120, 200] {
            let tv_r = we.tv_exact(n).to_f64().unwrap();
            let tv_f = walk_tv_f64(&spec, n, &LawKind::Leap);
            assert!(
                (tv_r - tv_f).abs() < 1e-13,
                "n={n}: rational {tv_r} float {tv_f}"
            );
            let a = ratio(1, 2);
            let tr = we.tv_rej_exact(n, 1, &a).unwrap().to_f64().unwrap();
            let tf = walk_tv_f64(&spec, n, &LawKind::Rej { r: 1, a: a.clone() });
            assert!((tr - tf).abs() < 1e-13, "rej n={n}: {tr} vs {tf}");
        }
    }

    #[test]
    fn rejection_tv_is_smaller() {
        let spec = SchemeSpec::motzkin();
        let we = WalkExact::new(&spec, 220).unwrap();
        let a = ratio(1, 2);
        for n in [20usize, 60, 150, 220] {
            let plain = we.tv_exact(n);
            let rej = we.tv_rej_exact(n, 1, &a).unwrap();
            assert!(rej < plain, "acceleration shrinks tv at n={n}");
        }
    }

    // brute-force Dyck-by-height enumeration
    fn dyck_heights_brute(k: usize) -> Vec<u64> {
        let mut counts = vec![0u64; k + 1];
        fn go(steps: &mut Vec<i8>, k: usize, counts: &mut [u64]) {
            if steps.len() == 2 * k {
                let mut y = 0i32;
                let mut h = 0i32;
                let mut ok = true;
                for s in steps.iter() {
                    y += *s as i32;
                    if y < 0 {
                        ok = false;
                        break;
                    }
                    h = h.max(y);
                }
                if ok && y == 0 {
                    counts[h as usize] += 1;
                }
                return;
            }
            for s in [1i8, -1] {
                steps.push(s);
                go(steps, k, counts);
                steps.pop();
            }
        }
        let mut steps = Vec::new();
        go(&mut steps, k, &mut counts);
        counts
    }

    #[test]
    fn dyck_height_table_matches_enumeration() {
        let t = dyck_height_table(7);
        for k in 1..=7usize {
            let brute = dyck_heights_brute(k);
            let mut total = BigInt::zero();
            for h in 0..=k {
                assert_eq!(*t.count(k, h), BigInt::from(brute[h]), "k={k} h={h}");
                total += t.count(k, h);
            }
            assert_eq!(total, t.catalan[k], "rows sum to Catalan at k={k}");
        }
        // frozen examples
        assert_eq!(*t.count(2, 1), BigInt::one());
        assert_eq!(*t.count(2, 2), BigInt::one());
        assert_eq!(*t.count(3, 1), BigInt::one());
        assert_eq!(*t.count(3, 2), BigInt::from(3u32));
        assert_eq!(*t.count(3, 3), BigInt::one());
        assert!(t.count(4, 0).is_zero());
    }

    #[test]
    fn height_law_small_and_normalized() {
        let spec = SchemeSpec::motzkin();
        let we = WalkExact::new(&spec, 30).unwrap();
        let ht = dyck_height_table(15);
        // n = 2: walks EE (h=0) and UD (h=1), each with probability 1/2
        // under the uniform law
        let law = height_law(&we, &ht, 2, &LawKind::Uniform).unwrap();
        assert_eq!(law.probs[&0], ratio(1, 2));
        assert_eq!(law.probs[&1], ratio(1, 2));
        for kind in [LawKind::Uniform, LawKind::Leap] {
            for n in [1usize, 7, 30] {
                let law = height_law(&we, &ht, n, &kind).unwrap();
                assert_eq!(law.total(), BigRational::one());
            }
        }
        // data-processing: height tv <= core tv
        for n in [10usize, 20, 30] {
            let dh = tv_height(&we, &ht, n, &LawKind::Leap).unwrap();
            let d = we.tv_exact(n);
            assert!(dh <= d, "height law cannot separate more than the core");
        }
    }

    #[test]
    fn generic_core_law_polya_smallest() {
        let spec = SchemeSpec::polya().unwrap();
        // n = 2: only core size 2 is possible (the component class has no
        // size-2 object)
        let law = generic_core_law(&spec, 2, &LawKind::Uniform).unwrap();
        assert!((law.prob(2) - 1.0).abs() < 1e-12, "law: {:?}", law.probs);
        for kind in [LawKind::Uniform, LawKind::Leap] {
            let law = generic_core_law(&spec, 150, &kind).unwrap();
            let total: f64 = law.probs.values().sum();
            assert!((total - 1.0).abs() < 1e-9);
        }
        assert!(generic_core_law(&spec, 10_000, &LawKind::Uniform).is_err());
    }

    #[test]
    fn generic_core_law_unimodal_near_mode() {
        let spec = SchemeSpec::polya().unwrap();
        let law = generic_core_law(&spec, 200, &LawKind::Uniform).unwrap();
        let probs: Vec<(usize, f64)> = law.probs.iter().map(|(k, p)| (*k, *p)).collect();
        let mode = probs
            .iter()
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap()
            .0;
        let expected = 200.0 / spec.mu;
        assert!(
            (mode as f64 - expected).abs() < 12.0,
            "mode {mode} vs n/mu {expected}"
        );
        // unimodal across the bulk (the extreme tails carry parity
        // oscillations because no component has size 2)
        let pmax = probs.iter().map(|(_, p)| *p).fold(0.0, f64::max);
        let bulk: Vec<f64> = probs
            .iter()
            .filter(|(_, p)| *p > 1e-2 * pmax)
            .map(|(_, p)| *p)
            .collect();
        let peak = bulk
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        for i in 1..=peak {
            assert!(bulk[i] >= bulk[i - 1] * 0.999);
        }
        for i in peak + 1..bulk.len() {
            assert!(bulk[i] <= bulk[i - 1] * 1.001);
        }
    }

    #[test]
    fn phylo_core_law_smallest() {
        // n = 2 leaves: either one component of size 2 on a single-leaf core
        // or two leaf components on the 2-leaf core; the joint counts make
        // these equally likely under the uniform law
        let spec = SchemeSpec::phylo().unwrap();
        let law = generic_core_law(&spec, 2, &LawKind::Uniform).unwrap();
        assert!((law.prob(1) - 0.5).abs() < 1e-12, "law {:?}", law.probs);
        assert!((law.prob(2) - 0.5).abs() < 1e-12);
    }
}
