//! Truncated generating-function arithmetic over exact rationals.
//!
//! Everything downstream (singularity location, Boltzmann parameters, exact
//! distortion/total-variation tables) is built on the series computed here.
//! Counting series are solved from their defining fixed-point equations,
//! starting from the zero series, with substitution `z -> z^i` done by index
//! dilation. The solvers exploit that one application of the defining map
//! extends the stable coefficient prefix, so coefficients are produced in a
//! single O(N^2) pass; `apply_*_map` re-applies the full defining equation and
//! is used to check idempotence past convergence.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub fn big(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

pub fn ratio(p: i64, q: i64) -> BigRational {
    BigRational::new(BigInt::from(p), BigInt::from(q))
}

/// Coefficients `0..=N` of a power series; all arithmetic truncates at the
/// smaller operand order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TruncatedSeries {
    coeffs: Vec<BigRational>,
}

impl TruncatedSeries {
    pub fn from_coeffs(coeffs: Vec<BigRational>) -> Self {
        assert!(!coeffs.is_empty(), "a series has at least the constant term");
        TruncatedSeries { coeffs }
    }

    pub fn zero(order: usize) -> Self {
        TruncatedSeries {
            coeffs: vec![BigRational::zero(); order + 1],
        }
    }

    pub fn one(order: usize) -> Self {
        let mut s = Self::zero(order);
        s.coeffs[0] = BigRational::one();
        s
    }

    /// The series `z` (or 0 when truncated at order 0).
    pub fn z(order: usize) -> Self {
        let mut s = Self::zero(order);
        if order >= 1 {
            s.coeffs[1] = BigRational::one();
        }
        s
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeff(&self, i: usize) -> &BigRational {
        &self.coeffs[i]
    }

    pub fn coeffs(&self) -> &[BigRational] {
        &self.coeffs
    }

    pub fn truncated(&self, order: usize) -> Self {
        let n = order.min(self.order());
        TruncatedSeries {
            coeffs: self.coeffs[..=n].to_vec(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    pub fn add(&self, rhs: &Self) -> Self {
        let n = self.order().min(rhs.order());
        let coeffs = (0..=n).map(|i| &self.coeffs[i] + &rhs.coeffs[i]).collect();
        TruncatedSeries { coeffs }
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        let n = self.order().min(rhs.order());
        let coeffs = (0..=n).map(|i| &self.coeffs[i] - &rhs.coeffs[i]).collect();
        TruncatedSeries { coeffs }
    }

    pub fn scale(&self, c: &BigRational) -> Self {
        TruncatedSeries {
            coeffs: self.coeffs.iter().map(|a| a * c).collect(),
        }
    }

    /// Cauchy product truncated at the smaller order.
    pub fn mul(&self, rhs: &Self) -> Self {
        let n = self.order().min(rhs.order());
        let mut coeffs = vec![BigRational::zero(); n + 1];
        for (i, a) in self.coeffs.iter().enumerate().take(n + 1) {
            if a.is_zero() {
                continue;
            }
            for (j, b) in rhs.coeffs.iter().enumerate().take(n + 1 - i) {
                if !b.is_zero() {
                    coeffs[i + j] += a * b;
                }
            }
        }
        TruncatedSeries { coeffs }
    }

    /// Substitution `z -> z^m`, keeping the original truncation order.
    pub fn dilate(&self, m: usize) -> Self {
        assert!(m >= 1);
        let n = self.order();
        let mut coeffs = vec![BigRational::zero(); n + 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            match i.checked_mul(m) {
                Some(im) if im <= n => coeffs[im] = a.clone(),
                _ => break,
            }
        }
        TruncatedSeries { coeffs }
    }

    pub fn derivative(&self) -> Self {
        if self.order() == 0 {
            return Self::zero(0);
        }
        let coeffs = (1..=self.order())
            .map(|i| &self.coeffs[i] * big(i as i64))
            .collect();
        TruncatedSeries { coeffs }
    }

    /// `exp(S)` for a series with zero constant term.
    pub fn exp(&self) -> Self {
        assert!(self.coeffs[0].is_zero(), "exp needs vanishing constant term");
        let n = self.order();
        let mut e = vec![BigRational::zero(); n + 1];
        e[0] = BigRational::one();
        for m in 1..=n {
            let mut acc = BigRational::zero();
            for j in 1..=m {
                if !self.coeffs[j].is_zero() {
                    acc += &self.coeffs[j] * big(j as i64) * &e[m - j];
                }
            }
            e[m] = acc / big(m as i64);
        }
        TruncatedSeries { coeffs: e }
    }

    /// `1/S` for a series with nonzero constant term.
    pub fn recip(&self) -> Self {
        assert!(!self.coeffs[0].is_zero(), "recip needs nonzero constant term");
        let n = self.order();
        let inv0 = BigRational::one() / &self.coeffs[0];
        let mut r = vec![BigRational::zero(); n + 1];
        r[0] = inv0.clone();
        for m in 1..=n {
            let mut acc = BigRational::zero();
            for i in 1..=m {
                if !self.coeffs[i].is_zero() {
                    acc += &self.coeffs[i] * &r[m - i];
                }
            }
            r[m] = -acc * &inv0;
        }
        TruncatedSeries { coeffs: r }
    }

    pub fn div(&self, rhs: &Self) -> Self {
        self.mul(&rhs.recip())
    }

    /// `log(1/(1-S))` for a series with zero constant term.
    pub fn log_inv_one_minus(&self) -> Self {
        assert!(self.coeffs[0].is_zero());
        let n = self.order();
        // L' = S'/(1-S), integrated term by term.
        let one_minus = TruncatedSeries::one(n).sub(self);
        let num = self.derivative();
        let lp = num.mul(&one_minus.recip().truncated(n.saturating_sub(1)));
        let mut coeffs = vec![BigRational::zero(); n + 1];
        for m in 1..=n {
            coeffs[m] = &lp.coeffs[m - 1] / big(m as i64);
        }
        TruncatedSeries { coeffs }
    }

    pub fn pow(&self, k: usize) -> Self {
        let mut acc = TruncatedSeries::one(self.order());
        for _ in 0..k {
            acc = acc.mul(self);
        }
        acc
    }

    pub fn eval_f64(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for c in self.coeffs.iter().rev() {
            acc = acc * x + c.to_f64().unwrap_or(0.0);
        }
        acc
    }

    pub fn eval_rational(&self, x: &BigRational) -> BigRational {
        let mut acc = BigRational::zero();
        for c in self.coeffs.iter().rev() {
            acc = acc * x + c;
        }
        acc
    }

    /// Horner evaluation in fixed-point arithmetic: `x` and the result are
    /// integers scaled by `2^shift`. Truncation error is below
    /// `(order + 2)` ulp, which at shift 256 is far past any use here.
    pub fn eval_fixed(&self, x_scaled: &BigInt, shift: u32) -> BigInt {
        let mut acc = BigInt::zero();
        for c in self.coeffs.iter().rev() {
            acc = (acc * x_scaled) >> shift;
            if !c.is_zero() {
                acc += (c.numer() << shift) / c.denom();
            }
        }
        acc
    }

    /// Trailing growth bound `(stride, R)` with `|a_{n+stride}| <= R |a_n|`
    /// near the truncation order. Tried over several strides because
    /// singularity pairs on a circle (e.g. at +/- sqrt(rho) after a
    /// `z -> z^2` substitution) make single-step ratios oscillate; the
    /// stride with the smallest per-step growth wins.
    pub fn growth_bound(&self) -> Option<(usize, f64)> {
        let n = self.order();
        let mut best: Option<(usize, f64, f64)> = None; // (stride, R, per-step)
        for stride in [1usize, 2, 3, 4, 6, 12] {
            if n < 4 * stride + 8 {
                continue;
            }
            let lo = n - (3 * stride + 8).min(n);
            let mut worst: f64 = 0.0;
            let mut pairs = 0usize;
            for i in lo..=n - stride {
                let a = &self.coeffs[i];
                let b = &self.coeffs[i + stride];
                if a.is_zero() || a.is_negative() || b.is_negative() {
                    continue;
                }
                let r = (b / a).to_f64()?;
                worst = worst.max(r);
                pairs += 1;
            }
            if pairs < 3 || worst == 0.0 {
                continue;
            }
            let r = worst * 1.05;
            let per_step = r.powf(1.0 / stride as f64);
            if best.as_ref().map_or(true, |(_, _, p)| per_step < *p) {
                best = Some((stride, r, per_step));
            }
        }
        best.map(|(s, r, _)| (s, r))
    }

    /// Evaluate at `0 <= x` with a certified geometric tail bound.
    /// Fails when the geometric bound does not close (x at or past the
    /// estimated radius).
    pub fn eval_f64_with_tail(&self, x: f64) -> Result<(f64, f64)> {
        if x == 0.0 {
            return Ok((self.coeffs[0].to_f64().unwrap_or(0.0), 0.0));
        }
        let (stride, ratio) = self
            .growth_bound()
            .ok_or_else(|| Error::InvalidParameter("series too short for tail bound".into()))?;
        let q = ratio * x.powi(stride as i32);
        if q >= 0.999 {
            return Err(Error::RadiusExceeded {
                x,
                radius: ratio.powf(-1.0 / stride as f64),
            });
        }
        // anchors: the last `stride` coefficients; every tail term is some
        // anchor scaled by a power of q
        let n = self.order();
        let mut anchor = 0.0f64;
        for m in (n + 1 - stride.min(n))..=n {
            let c = self.coeffs[m].to_f64().unwrap_or(0.0).abs();
            anchor += c * x.powi(m as i32);
        }
        let tail = anchor * q / (1.0 - q);
        Ok((self.eval_f64(x), tail))
    }
}

/// Expectation and standard deviation of the size of a Boltzmann sample at
/// parameter `x`: `mu = x G'(x)/G(x)`, `sigma = sqrt(x mu'(x))`.
#[derive(Clone, Copy, Debug)]
pub struct BoltzmannMoments {
    pub x: f64,
    pub value: f64,
    pub mu: f64,
    pub sigma: f64,
}

pub fn boltzmann_moments(series: &TruncatedSeries, x: f64) -> Result<BoltzmannMoments> {
    let d1 = series.derivative();
    let d2 = d1.derivative();
    let (g, _) = series.eval_f64_with_tail(x)?;
    let (gp, _) = d1.eval_f64_with_tail(x)?;
    let (gpp, _) = d2.eval_f64_with_tail(x)?;
    moments_from_values(x, g, gp, gpp)
}

/// Boltzmann moments certified by agreement between two truncation orders
/// instead of a coefficient-ratio tail. Component series whose coefficients
/// mix several substitution lattices (the mobile classes) have no clean
/// trailing ratio, but their truncation error at the singularity is far
/// below any tolerance used here.
pub fn boltzmann_moments_checked(
    series: &TruncatedSeries,
    x: f64,
    tol: f64,
) -> Result<BoltzmannMoments> {
    let shorter = series.truncated(series.order() * 3 / 4);
    let pair = |s: &TruncatedSeries| {
        let d1 = s.derivative();
        let d2 = d1.derivative();
        (s.eval_f64(x), d1.eval_f64(x), d2.eval_f64(x))
    };
    let (g, gp, gpp) = pair(series);
    let (g2, gp2, gpp2) = pair(&shorter);
    for (a, b) in [(g, g2), (gp, gp2), (gpp, gpp2)] {
        if (a - b).abs() > tol * (1.0 + a.abs()) {
            return Err(Error::RadiusExceeded { x, radius: x });
        }
    }
    moments_from_values(x, g, gp, gpp)
}

fn moments_from_values(x: f64, g: f64, gp: f64, gpp: f64) -> Result<BoltzmannMoments> {
    if g <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "series value {g} at x={x} is not positive"
        )));
    }
    let mu = x * gp / g;
    // mu'(x) = (G' + x G'')/G - x (G'/G)^2
    let mu_prime = (gp + x * gpp) / g - x * (gp / g) * (gp / g);
    let var = x * mu_prime;
    if var < -1e-9 {
        return Err(Error::InvalidParameter(format!(
            "negative size variance {var} at x={x}"
        )));
    }
    Ok(BoltzmannMoments {
        x,
        value: g,
        mu,
        sigma: var.max(0.0).sqrt(),
    })
}

/// Values `f(x^j)` for `j = 1..=len`, with per-entry certified tails below
/// `eps` and enough entries that the remaining contribution to the
/// maximum-index product is below `eps`.
#[derive(Clone, Debug)]
pub struct EvalTable {
    pub x: f64,
    pub eps: f64,
    values: Vec<f64>,
}

impl EvalTable {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `f(x^m)`; beyond the stored range the value is indistinguishable from
    /// `x^m` at the table tolerance (f(y) = a_1 y + O(y^2) with a_1 = 1 for
    /// the tree classes used here).
    pub fn value(&self, m: usize) -> f64 {
        assert!(m >= 1);
        if m <= self.values.len() {
            self.values[m - 1]
        } else {
            self.x.powi(m as i32)
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Builds the table of `series(x^j)`. `first_override` supplies the `j = 1`
/// entry when `x` sits exactly at the singularity, where direct summation no
/// longer has a closing tail but the limit value is known analytically.
pub fn build_eval_table(
    series: &TruncatedSeries,
    x: f64,
    eps: f64,
    first_override: Option<f64>,
) -> Result<EvalTable> {
    if !(0.0 < x && x < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "eval table needs 0 < x < 1, got {x}"
        )));
    }
    let mut values = Vec::new();
    let first = match first_override {
        Some(v) => v,
        None => {
            let (v, tail) = series.eval_f64_with_tail(x)?;
            if tail > eps {
                return Err(Error::RadiusExceeded { x, radius: x });
            }
            v
        }
    };
    values.push(first);
    let mut m = 2usize;
    loop {
        let y = x.powi(m as i32);
        let (v, tail) = series.eval_f64_with_tail(y)?;
        if tail > eps {
            return Err(Error::RadiusExceeded { x: y, radius: y });
        }
        values.push(v);
        // f(x^{m+k}) <= x^k f(x^m) for positive series with f(0) = 0, hence
        // sum_{j>m} f(x^j)/j <= f(x^m) x/(1-x).
        if v * x / (1.0 - x) < eps && m >= 3 {
            break;
        }
        m += 1;
        if m > 4096 {
            return Err(Error::NonConvergence("eval table did not close".into()));
        }
    }
    for w in values.windows(2).skip(1) {
        debug_assert!(w[0] > w[1], "table values must decrease");
    }
    Ok(EvalTable { x, eps, values })
}

// ---------------------------------------------------------------------------
// Counting-series solvers.
// ---------------------------------------------------------------------------

/// Rooted unordered trees counted by vertices:
/// `A(z) = z exp(sum_{i>=1} A(z^i)/i)`.
pub fn solve_polya_series(order: usize) -> Result<TruncatedSeries> {
    if order < 1 {
        return Err(Error::InvalidParameter("order must be >= 1".into()));
    }
    let n = order;
    let mut a = vec![BigInt::zero(); n + 1];
    // s_tilde[m] = m * [z^m] sum_i A(z^i)/i = sum_{d|m} d a_d
    let mut s_tilde = vec![BigInt::zero(); n + 1];
    // e[m] = [z^m] exp(...) = a_{m+1}
    let mut e = vec![BigInt::zero(); n]; // indices 0..n-1 suffice
    if !e.is_empty() {
        e[0] = BigInt::one();
    }
    for m in 1..=n {
        a[m] = if m == 1 { BigInt::one() } else { e[m - 1].clone() };
        // push d = m into s_tilde at its multiples
        let contrib = BigInt::from(m) * &a[m];
        let mut idx = m;
        while idx <= n {
            s_tilde[idx] += &contrib;
            idx += m;
        }
        if m < n {
            let mut acc = BigInt::zero();
            for j in 1..=m {
                if !s_tilde[j].is_zero() && !e[m - j].is_zero() {
                    acc += &s_tilde[j] * &e[m - j];
                }
            }
            let (q, r) = num_integer::Integer::div_rem(&acc, &BigInt::from(m));
            debug_assert!(r.is_zero());
            e[m] = q;
        }
    }
    Ok(TruncatedSeries::from_coeffs(
        a.into_iter().map(BigRational::from_integer).collect(),
    ))
}

/// Unordered binary trees counted by leaves:
/// `A(z) = z + (A(z)^2 + A(z^2))/2`.
pub fn solve_phylo_series(order: usize) -> Result<TruncatedSeries> {
    if order < 1 {
        return Err(Error::InvalidParameter("order must be >= 1".into()));
    }
    let n = order;
    let mut a = vec![BigInt::zero(); n + 1];
    a[1] = BigInt::one();
    for m in 2..=n {
        let mut acc = BigInt::zero();
        let half = m / 2;
        for i in 1..=half {
            let j = m - i;
            if i == j {
                // a_i (a_i + 1) / 2 combines the squared term with A(z^2)
                let prod = &a[i] * (&a[i] + 1u32);
                acc += prod / 2u32;
            } else {
                acc += &a[i] * &a[j];
            }
        }
        a[m] = acc;
    }
    Ok(TruncatedSeries::from_coeffs(
        a.into_iter().map(BigRational::from_integer).collect(),
    ))
}

/// Unlabeled k-ary mobiles counted by leaves:
/// `A(z) = z + (1/k) sum_{d|k} phi(d) A(z^d)^{k/d}`.
pub fn solve_kary_mobile_series(k: usize, order: usize) -> Result<TruncatedSeries> {
    if k < 2 {
        return Err(Error::InvalidParameter("mobile arity must be >= 2".into()));
    }
    let n = order;
    let divs = divisors(k as u64);
    let mut a = vec![BigInt::zero(); n + 1];
    // powers[m][j] = [z^j] A(z)^m for m = 1..=k (index 0 unused)
    let mut powers = vec![vec![BigInt::zero(); n + 1]; k + 1];
    for m in 1..=n {
        // P_j[m] for j = 2..=k uses only a_i with i < m.
        for j in 2..=k {
            let mut acc = BigInt::zero();
            for i in 1..m {
                if !a[i].is_zero() && !powers[j - 1][m - i].is_zero() {
                    acc += &a[i] * &powers[j - 1][m - i];
                }
            }
            powers[j][m] = acc;
        }
        let mut num = BigInt::zero();
        for &d in &divs {
            let d = d as usize;
            if m % d != 0 {
                continue;
            }
            let phi = euler_phi(d as u64);
            let inner = m / d;
            let p = k / d;
            let term = if p == 1 {
                a[inner].clone()
            } else {
                powers[p][inner].clone()
            };
            num += BigInt::from(phi) * term;
        }
        if m == 1 {
            num += BigInt::from(k as u64);
        }
        let (q, r) = num_integer::Integer::div_rem(&num, &BigInt::from(k as u64));
        debug_assert!(r.is_zero(), "k-ary mobile counts must be integral");
        a[m] = q;
        powers[1][m] = a[m].clone();
    }
    Ok(TruncatedSeries::from_coeffs(
        a.into_iter().map(BigRational::from_integer).collect(),
    ))
}

/// Unlabeled mobiles with no unary node, counted by leaves:
/// `A(z) = z + sum_{d>=1} (phi(d)/d) log(1/(1-A(z^d))) - A(z)`.
pub fn solve_schroder_mobile_series(order: usize) -> Result<TruncatedSeries> {
    let n = order;
    let mut a = vec![BigRational::zero(); n + 1];
    // r = 1/(1-A), lambda = log(1/(1-A))
    let mut r = vec![BigRational::zero(); n + 1];
    r[0] = BigRational::one();
    let mut lambda = vec![BigRational::zero(); n + 1];
    for m in 1..=n {
        // t_m = [z^m] (log(1/(1-A)) - A) depends on a_i, r_i with i < m
        let mut t = BigRational::zero();
        for j in 1..m {
            if !a[j].is_zero() && !r[m - j].is_zero() {
                t += &a[j] * big(j as i64) * &r[m - j];
            }
        }
        t /= big(m as i64);
        let mut dil = BigRational::zero();
        for d in 2..=m {
            if m % d != 0 {
                continue;
            }
            let lam = &lambda[m / d];
            if !lam.is_zero() {
                dil += lam * ratio(euler_phi(d as u64) as i64, d as i64);
            }
        }
        a[m] = t.clone() + dil;
        if m == 1 {
            a[1] += BigRational::one();
        }
        let mut rm = BigRational::zero();
        for i in 1..=m {
            if !a[i].is_zero() && !r[m - i].is_zero() {
                rm += &a[i] * &r[m - i];
            }
        }
        r[m] = rm;
        lambda[m] = &a[m] + &t;
    }
    Ok(TruncatedSeries::from_coeffs(a))
}

/// Generic fixed-point solve from the zero series; each application of the
/// defining map must extend the stable prefix, so convergence within
/// `order + 2` iterations is an invariant of well-formed equations.
pub fn solve_fixed_point<F>(order: usize, f: F) -> Result<TruncatedSeries>
where
    F: Fn(&TruncatedSeries) -> TruncatedSeries,
{
    let mut cur = TruncatedSeries::zero(order);
    for _ in 0..=order + 1 {
        let next = f(&cur);
        assert_eq!(next.order(), order, "defining map must preserve order");
        if next == cur {
            return Ok(cur);
        }
        cur = next;
    }
    Err(Error::NonConvergence(format!(
        "no fixed point within {} iterations",
        order + 2
    )))
}

/// One application of the defining equation for rooted unordered trees,
/// usable as an idempotence check on a solved series.
pub fn apply_polya_map(a: &TruncatedSeries) -> TruncatedSeries {
    let n = a.order();
    let mut s = TruncatedSeries::zero(n);
    let mut i = 1usize;
    while i <= n.max(1) {
        let d = a.dilate(i).scale(&ratio(1, i as i64));
        if d.is_zero() && i > 1 {
            break;
        }
        s = s.add(&d);
        i += 1;
    }
    TruncatedSeries::z(n).mul(&s.exp())
}

pub fn apply_phylo_map(a: &TruncatedSeries) -> TruncatedSeries {
    let n = a.order();
    let half = ratio(1, 2);
    TruncatedSeries::z(n)
        .add(&a.mul(a).scale(&half))
        .add(&a.dilate(2).scale(&half))
}

// ---------------------------------------------------------------------------
// Component-class series for the shipped schemes.
// ---------------------------------------------------------------------------

/// Motzkin component class: `B(z) = z^2/(1-z)^2`, horizontal-step weight `u`.
pub fn motzkin_b_series(order: usize, u: &BigRational) -> TruncatedSeries {
    let mut c = vec![BigRational::zero(); order + 1];
    let mut up = BigRational::one();
    for m in 2..=order {
        // [z^m] z^2/(1-uz)^2 = (m-1) u^{m-2}
        c[m] = big((m - 1) as i64) * &up;
        up *= u;
    }
    TruncatedSeries::from_coeffs(c)
}

/// Schroder-walk component class: `B(z) = z/(1-z)^2`.
pub fn schroder_b_series(order: usize) -> TruncatedSeries {
    let mut c = vec![BigRational::zero(); order + 1];
    for (m, cm) in c.iter_mut().enumerate().skip(1) {
        *cm = big(m as i64);
    }
    TruncatedSeries::from_coeffs(c)
}

/// `Seq(Z)` with atom weight `u`: `D(z) = 1/(1-uz)`.
pub fn seq_series(order: usize, u: &BigRational) -> TruncatedSeries {
    let mut c = vec![BigRational::zero(); order + 1];
    let mut up = BigRational::one();
    for cm in c.iter_mut() {
        *cm = up.clone();
        up *= u;
    }
    TruncatedSeries::from_coeffs(c)
}

/// Component class for rooted unordered trees:
/// `B(z) = z exp(sum_{i>=2} A(z^i)/i)`.
pub fn polya_b_series(a: &TruncatedSeries) -> TruncatedSeries {
    let n = a.order();
    let mut s = TruncatedSeries::zero(n);
    for i in 2..=n.max(2) {
        let d = a.dilate(i).scale(&ratio(1, i as i64));
        if d.is_zero() {
            break;
        }
        s = s.add(&d);
    }
    TruncatedSeries::z(n).mul(&s.exp())
}

/// Component class for unordered binary trees: `B(z) = z + A(z^2)/2`.
pub fn phylo_b_series(a: &TruncatedSeries) -> TruncatedSeries {
    TruncatedSeries::z(a.order()).add(&a.dilate(2).scale(&ratio(1, 2)))
}

/// Component class for k-ary mobiles:
/// `B(z) = z + (1/k) sum_{d|k, d>1} phi(d) A(z^d)^{k/d}`.
pub fn kary_mobile_b_series(a: &TruncatedSeries, k: usize) -> TruncatedSeries {
    let n = a.order();
    let mut b = TruncatedSeries::z(n);
    for d in divisors(k as u64) {
        let d = d as usize;
        if d == 1 {
            continue;
        }
        let term = a
            .dilate(d)
            .pow(k / d)
            .scale(&ratio(euler_phi(d as u64) as i64, k as i64));
        b = b.add(&term);
    }
    b
}

/// Component class for mobiles with no unary node:
/// `B(z) = z + sum_{d>=2} (phi(d)/d) log(1/(1-A(z^d)))`.
pub fn schroder_mobile_b_series(a: &TruncatedSeries) -> TruncatedSeries {
    let n = a.order();
    let lambda = a.log_inv_one_minus();
    let mut b = TruncatedSeries::z(n);
    for d in 2..=n.max(2) {
        let term = lambda
            .dilate(d)
            .scale(&ratio(euler_phi(d as u64) as i64, d as i64));
        if term.is_zero() {
            break;
        }
        b = b.add(&term);
    }
    b
}

// ---------------------------------------------------------------------------
// Per-trial success probabilities.
// ---------------------------------------------------------------------------

/// Exact `q_n = [z^n] (D(r z)/D(r)) / (1 - B(r z)/B(r))` for `n <= n_max`.
///
/// The convolution runs on `rho`-denominator-scaled values
/// (`q~_n = q_n s^n` with `rho = p/s`), which keeps every intermediate
/// denominator small instead of reducing gcds of `s^n`-sized numbers at
/// each step.
pub fn q_series_exact(
    b: &TruncatedSeries,
    d: Option<&TruncatedSeries>,
    rho: &BigRational,
    b_at_rho: &BigRational,
    d_at_rho: Option<&BigRational>,
    n_max: usize,
) -> Vec<BigRational> {
    assert!(b.order() >= n_max, "component series too short");
    let p = BigRational::from_integer(rho.numer().clone());
    let s = BigRational::from_integer(rho.denom().clone());
    // u~_i = u_i s^i = b_i p^i / B(rho)
    let mut u = vec![BigRational::zero(); n_max + 1];
    let mut pp = BigRational::one();
    for (i, ui) in u.iter_mut().enumerate() {
        if i > 0 {
            pp *= &p;
        }
        *ui = b.coeff(i) * &pp / b_at_rho;
    }
    let mut v = vec![BigRational::zero(); n_max + 1];
    match d {
        Some(ds) => {
            assert!(ds.order() >= n_max);
            let drho = d_at_rho.expect("D(rho) required with a D component");
            let mut pp = BigRational::one();
            for (i, vi) in v.iter_mut().enumerate() {
                if i > 0 {
                    pp *= &p;
                }
                *vi = ds.coeff(i) * &pp / drho;
            }
        }
        None => v[0] = BigRational::one(),
    }
    // Q~ satisfies q~_n = v~_n + sum u~_i q~_{n-i}; divide out s^n at the end
    let mut qt = vec![BigRational::zero(); n_max + 1];
    for n in 0..=n_max {
        let mut acc = v[n].clone();
        for i in 1..=n {
            if !u[i].is_zero() && !qt[n - i].is_zero() {
                acc += &u[i] * &qt[n - i];
            }
        }
        qt[n] = acc;
    }
    let mut q = Vec::with_capacity(n_max + 1);
    let mut sp = BigRational::one();
    for (n, qn) in qt.into_iter().enumerate() {
        if n > 0 {
            sp *= &s;
        }
        q.push(qn / &sp);
    }
    q
}

/// Float-path variant of `q_series_exact` on pre-scaled coefficients
/// `u_i = b_i rho^i / B(rho)` (and `v` likewise for the D part).
pub fn q_series_f64(u: &[f64], v: Option<&[f64]>, n_max: usize) -> Vec<f64> {
    let mut q = vec![0.0; n_max + 1];
    for n in 0..=n_max {
        let mut acc = match v {
            Some(v) => v[n],
            None => {
                if n == 0 {
                    1.0
                } else {
                    0.0
                }
            }
        };
        for i in 1..=n.min(u.len() - 1) {
            acc += u[i] * q[n - i];
        }
        q[n] = acc;
    }
    q
}

/// `coeff_i * rho^i / norm` as f64, for feeding the float q-path.
pub fn scaled_coeffs_f64(s: &TruncatedSeries, rho: &BigRational, norm: &BigRational) -> Vec<f64> {
    let mut out = Vec::with_capacity(s.order() + 1);
    let mut rp = BigRational::one();
    for (i, c) in s.coeffs().iter().enumerate() {
        if i > 0 {
            rp *= rho;
        }
        out.push((c * &rp / norm).to_f64().unwrap_or(0.0));
    }
    out
}

/// Iterated Richardson extrapolation for sequences with an asymptotic
/// expansion `v_n = L (1 + c1/n + c2/n^2 + ...)`: level `l` eliminates the
/// `1/n^l` term using `n^l` weights.
pub fn richardson(idx: &[f64], vals: &[f64], levels: usize) -> Option<f64> {
    if idx.len() != vals.len() || vals.len() <= levels {
        return None;
    }
    // Neville-style table: the level-l entry at slot i is anchored on the
    // points idx[i..=i+l], and the elimination weights are idx^l.
    let mut cur = vals.to_vec();
    for level in 1..=levels {
        let mut next = Vec::with_capacity(cur.len() - 1);
        for i in 0..cur.len() - 1 {
            let (w0, w1) = (
                idx[i].powi(level as i32),
                idx[i + level].powi(level as i32),
            );
            next.push((w1 * cur[i + 1] - w0 * cur[i]) / (w1 - w0));
        }
        cur = next;
    }
    cur.last().copied()
}

/// Estimate of the singularity location from trailing coefficient ratios
/// `a_n/a_{n+stride}`, accelerated by Richardson extrapolation (the ratios
/// carry a `1/n` expansion). `stride` handles periodic supports.
pub fn rho_from_ratios(s: &TruncatedSeries, stride: usize) -> Option<f64> {
    let n = s.order();
    // align to the trailing nonzero coefficient
    let mut top = n;
    while top > 0 && s.coeff(top).is_zero() {
        top -= 1;
    }
    let take = 24usize;
    let mut ratios = Vec::new();
    let mut idx = Vec::new();
    let mut m = top;
    while ratios.len() < take && m > stride * 2 {
        let a = s.coeff(m - stride);
        let b = s.coeff(m);
        if !a.is_zero() && !b.is_zero() {
            let r = (a / b).to_f64()?;
            ratios.push(r.powf(1.0 / stride as f64));
            idx.push((m - stride) as f64 / stride as f64);
        }
        m -= stride;
    }
    if ratios.len() < 6 {
        return None;
    }
    ratios.reverse();
    idx.reverse();
    richardson(&idx, &ratios, 2)
}

// ---------------------------------------------------------------------------

pub fn euler_phi(mut n: u64) -> u64 {
    let mut result = n;
    let mut p = 2;
    while p * p <= n {
        if n % p == 0 {
            while n % p == 0 {
                n /= p;
            }
            result -= result / p;
        }
        p += 1;
    }
    if n > 1 {
        result -= result / n;
    }
    result
}

pub fn divisors(n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut d = 1;
    while d * d <= n {
        if n % d == 0 {
            out.push(d);
            if d != n / d {
                out.push(n / d);
            }
        }
        d += 1;
    }
    out.sort_unstable();
    out
}

/// `sqrt(2)` to roughly `digits` decimal digits, by Newton iteration on
/// rationals.
pub fn sqrt2_rational(digits: u32) -> BigRational {
    let mut x = ratio(3, 2);
    let two = big(2);
    // Newton doubles correct digits each step.
    let steps = (digits as f64).log2().ceil() as u32 + 3;
    for _ in 0..steps {
        x = (&x + &two / &x) / &two;
    }
    x
}

/// `ln 2` to high precision: `2 atanh(1/3)`.
pub fn ln2_rational(terms: usize) -> BigRational {
    let third = ratio(1, 3);
    let ninth = &third * &third;
    let mut acc = BigRational::zero();
    let mut pow = third;
    for k in 0..terms {
        acc += &pow / big((2 * k + 1) as i64);
        pow *= &ninth;
    }
    acc * big(2)
}

/// `1/e` to high precision via the alternating factorial series.
pub fn inv_e_rational(terms: usize) -> BigRational {
    let mut acc = BigRational::zero();
    let mut term = BigRational::one();
    for k in 0..terms {
        if k > 0 {
            term = term / big(k as i64) * big(-1);
        }
        acc += &term;
    }
    acc
}

pub fn bigint_shifted(x: &BigRational, shift: u32) -> BigInt {
    (x.numer() << shift) / x.denom()
}

pub fn rational_from_shifted(x: &BigInt, shift: u32) -> BigRational {
    BigRational::new(x.clone(), BigInt::one() << shift)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_identities() {
        // (1+z)^2 = 1 + 2z + z^2
        let p = TruncatedSeries::from_coeffs(vec![big(1), big(1), big(0)]);
        let sq = p.mul(&p);
        assert_eq!(sq.coeffs(), &[big(1), big(2), big(1)]);
        // absorbing zero
        let z = TruncatedSeries::zero(2);
        assert!(p.mul(&z).is_zero());
    }

    #[test]
    fn truncation_order_is_min() {
        let a = TruncatedSeries::one(5);
        let b = TruncatedSeries::one(3);
        assert_eq!(a.mul(&b).order(), 3);
        assert_eq!(a.add(&b).order(), 3);
    }

    #[test]
    fn motzkin_b_matches_hand_expansion() {
        // z^2/(1-z)^2 to order 6: z^2 + 2z^3 + 3z^4 + 4z^5 + 5z^6
        let b = motzkin_b_series(6, &big(1));
        let want = [0, 0, 1, 2, 3, 4, 5];
        for (i, w) in want.iter().enumerate() {
            assert_eq!(b.coeff(i), &big(*w));
        }
    }

    #[test]
    fn exp_and_log_are_inverse() {
        let s = TruncatedSeries::from_coeffs(vec![big(0), big(1), ratio(1, 3), big(2), ratio(-1, 5)]);
        let e = s.exp();
        // log(e) = s via log(1/(1-T)) with T = 1 - 1/e... check instead exp(log(1/(1-s)))
        let l = s.log_inv_one_minus();
        let back = l.exp();
        let target = TruncatedSeries::one(4).sub(&s).recip();
        assert_eq!(back, target);
        assert_eq!(e.coeff(0), &big(1));
    }

    // Brute-force enumeration oracle: rooted unordered trees by vertex count,
    // as canonical multisets of subtrees.
    fn enumerate_rooted_trees(max_n: usize) -> Vec<usize> {
        // canonical form: sorted list of child canonical strings
        fn trees(n: usize, memo: &mut Vec<Option<Vec<String>>>) -> Vec<String> {
            if let Some(v) = &memo[n] {
                return v.clone();
            }
            let mut out = Vec::new();
            if n == 1 {
                out.push("()".to_string());
            } else {
                // choose multiset of subtrees with sizes summing to n-1
                fn go(
                    remaining: usize,
                    max_size: usize,
                    cur: &mut Vec<String>,
                    out: &mut Vec<String>,
                    memo: &mut Vec<Option<Vec<String>>>,
                ) {
                    if remaining == 0 {
                        let mut kids = cur.clone();
                        kids.sort();
                        out.push(format!("({})", kids.join("")));
                        return;
                    }
                    for size in (1..=remaining.min(max_size)).rev() {
                        let subs = trees(size, memo);
                        // choose a multiset of subtrees of this size: to keep
                        // it simple pick one and recurse allowing repeats with
                        // a canonical non-increasing ordering on (size, repr)
                        for t in subs {
                            if let Some(last) = cur.last() {
                                // enforce non-increasing (size, string) order
                                let last_size = last.len();
                                if t.len() > last_size || (t.len() == last_size && t > *last) {
                                    continue;
                                }
                            }
                            cur.push(t.clone());
                            go(remaining - size, size, cur, out, memo);
                            cur.pop();
                        }
                    }
                }
                let mut cur = Vec::new();
                go(n - 1, n - 1, &mut cur, &mut out, memo);
                out.sort();
                out.dedup();
            }
            memo[n] = Some(out.clone());
            out
        }
        let mut memo = vec![None; max_n + 1];
        (1..=max_n).map(|n| trees(n, &mut memo).len()).collect()
    }

    #[test]
    fn polya_series_matches_enumeration() {
        let a = solve_polya_series(12).unwrap();
        let counts = enumerate_rooted_trees(12);
        assert_eq!(a.coeff(0), &big(0));
        for (n, c) in counts.iter().enumerate() {
            assert_eq!(a.coeff(n + 1), &big(*c as i64), "mismatch at n={}", n + 1);
        }
        // frozen prefix from the same oracle
        let want = [0i64, 1, 1, 2, 4, 9, 20, 48];
        for (i, w) in want.iter().enumerate() {
            assert_eq!(a.coeff(i), &big(*w));
        }
    }

    // Unordered binary trees by leaf count.
    fn enumerate_phylo(max_n: usize) -> Vec<u64> {
        let mut counts = vec![0u64; max_n + 1];
        counts[1] = 1;
        for n in 2..=max_n {
            let mut total = 0u64;
            for i in 1..=n / 2 {
                let j = n - i;
                if i == j {
                    total += counts[i] * (counts[i] + 1) / 2;
                } else {
                    total += counts[i] * counts[j];
                }
            }
            counts[n] = total;
        }
        counts
    }

    #[test]
    fn phylo_series_matches_enumeration() {
        let a = solve_phylo_series(12).unwrap();
        let counts = enumerate_phylo(12);
        for n in 1..=12 {
            assert_eq!(a.coeff(n), &big(counts[n] as i64));
        }
        let want = [0i64, 1, 1, 1, 2, 3, 6, 11, 23];
        for (i, w) in want.iter().enumerate() {
            assert_eq!(a.coeff(i), &big(*w));
        }
    }

    #[test]
    fn solvers_are_idempotent_past_convergence() {
        let a = solve_polya_series(40).unwrap();
        assert_eq!(apply_polya_map(&a), a);
        let p = solve_phylo_series(40).unwrap();
        assert_eq!(apply_phylo_map(&p), p);
    }

    #[test]
    fn generic_fixed_point_agrees_with_incremental() {
        let direct = solve_phylo_series(16).unwrap();
        let fp = solve_fixed_point(16, apply_phylo_map).unwrap();
        assert_eq!(direct, fp);
    }

    #[test]
    fn ternary_mobile_series_small_values() {
        let a = solve_kary_mobile_series(3, 9).unwrap();
        // size support is 1 mod 2; one mobile each at n = 1 and n = 3
        assert_eq!(a.coeff(1), &big(1));
        assert_eq!(a.coeff(2), &big(0));
        assert_eq!(a.coeff(3), &big(1));
        assert_eq!(a.coeff(4), &big(0));
        // k = 2 reduces to the phylo equation
        let m2 = solve_kary_mobile_series(2, 12).unwrap();
        let ph = solve_phylo_series(12).unwrap();
        assert_eq!(m2, ph);
    }

    #[test]
    fn schroder_mobile_series_small_values() {
        let a = solve_schroder_mobile_series(8).unwrap();
        assert_eq!(a.coeff(1), &big(1));
        assert_eq!(a.coeff(2), &big(1));
        // residual check against the defining equation
        let n = a.order();
        let lambda_full = {
            let mut s = TruncatedSeries::zero(n);
            for d in 1..=n {
                let term = a
                    .dilate(d)
                    .log_inv_one_minus()
                    .scale(&ratio(euler_phi(d as u64) as i64, d as i64));
                if term.is_zero() {
                    break;
                }
                s = s.add(&term);
            }
            s
        };
        let rhs = TruncatedSeries::z(n).add(&lambda_full).sub(&a);
        assert_eq!(rhs, a);
    }

    #[test]
    fn q_series_motzkin_closed_form() {
        let b = motzkin_b_series(60, &big(1));
        let d = seq_series(60, &big(1));
        let rho = ratio(1, 3);
        let q = q_series_exact(&b, Some(&d), &rho, &ratio(1, 4), Some(&ratio(3, 2)), 60);
        assert_eq!(q[0], ratio(2, 3));
        assert_eq!(q[1], ratio(2, 9));
        // q_n = (1/3)(1 + (-1/3)^n)
        let third = ratio(1, 3);
        let neg_third = ratio(-1, 3);
        let mut pw = BigRational::one();
        for (n, qn) in q.iter().enumerate() {
            let want = &third * (BigRational::one() + &pw);
            assert_eq!(qn, &want, "q at n={n}");
            assert!(*qn >= BigRational::zero() && *qn <= BigRational::one());
            pw *= &neg_third;
        }
    }

    #[test]
    fn q_series_float_matches_exact() {
        let b = motzkin_b_series(80, &big(1));
        let d = seq_series(80, &big(1));
        let rho = ratio(1, 3);
        let qe = q_series_exact(&b, Some(&d), &rho, &ratio(1, 4), Some(&ratio(3, 2)), 80);
        let u = scaled_coeffs_f64(&b, &rho, &ratio(1, 4));
        let v = scaled_coeffs_f64(&d, &rho, &ratio(3, 2));
        let qf = q_series_f64(&u, Some(&v), 80);
        for n in 0..=80 {
            assert!((qf[n] - qe[n].to_f64().unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn moments_motzkin_and_seq() {
        let b = motzkin_b_series(220, &big(1));
        let m = boltzmann_moments(&b, 1.0 / 3.0).unwrap();
        assert!((m.mu - 3.0).abs() < 1e-9, "mu = {}", m.mu);
        assert!((m.sigma * m.sigma - 1.5).abs() < 1e-8, "sigma^2 = {}", m.sigma * m.sigma);
        assert!((m.value - 0.25).abs() < 1e-12);

        let d = seq_series(200, &big(1));
        let md = boltzmann_moments(&d, 0.5).unwrap();
        assert!((md.mu - 1.0).abs() < 1e-10);
    }

    #[test]
    fn moments_closed_form_vs_series_cross_check() {
        // mu(x) = 2/(1-x) and sigma^2(x) = 2x/(1-x)^2 for the Motzkin B class
        let b = motzkin_b_series(240, &big(1));
        for &x in &[0.1, 0.2, 0.3] {
            let m = boltzmann_moments(&b, x).unwrap();
            assert!((m.mu - 2.0 / (1.0 - x)).abs() < 1e-10);
            assert!((m.sigma * m.sigma - 2.0 * x / (1.0 - x) / (1.0 - x)).abs() < 1e-9);
        }
    }

    #[test]
    fn eval_table_shapes() {
        let a = solve_polya_series(120).unwrap();
        let t = build_eval_table(&a, 0.25, 1e-12, None).unwrap();
        assert!(t.len() >= 3);
        for m in 1..t.len() {
            assert!(t.value(m) > t.value(m + 1));
        }
        // entries shrink like x^m
        assert!(t.value(1) < 0.4);
        // x -> 0 limit
        let t0 = build_eval_table(&a, 1e-4, 1e-12, None).unwrap();
        assert!(t0.value(1) < 2e-4);
        // J grows as eps shrinks
        let t1 = build_eval_table(&a, 0.25, 1e-6, None).unwrap();
        let t2 = build_eval_table(&a, 0.25, 1e-13, None).unwrap();
        assert!(t2.len() >= t1.len());
        // rejection past the radius
        assert!(build_eval_table(&a, 0.35, 1e-12, None).is_err());
    }

    #[test]
    fn eval_table_cross_validation_two_routes() {
        // series summation vs fixed-point refinement at a point inside the disk
        let a = solve_polya_series(200).unwrap();
        let x = 0.3;
        let (direct, tail) = a.eval_f64_with_tail(x).unwrap();
        assert!(tail < 1e-12);
        // y <- x exp(y + sum_{i>=2} A(x^i)/i)
        let mut s2 = 0.0;
        for i in 2..60 {
            let (v, _) = a.eval_f64_with_tail(x.powi(i)).unwrap();
            s2 += v / i as f64;
        }
        let mut y = 0.0;
        for _ in 0..200 {
            y = x * (y + s2).exp();
        }
        assert!((y - direct).abs() < 1e-11, "direct {direct} vs refined {y}");
    }

    #[test]
    fn rho_ratio_estimates() {
        let a = solve_polya_series(160).unwrap();
        let r = rho_from_ratios(&a, 1).unwrap();
        assert!((r - 0.3383218569).abs() < 5e-4, "polya rho estimate {r}");
        let p = solve_phylo_series(160).unwrap();
        let rp = rho_from_ratios(&p, 1).unwrap();
        assert!((rp - 0.4026975037).abs() < 5e-4, "phylo rho estimate {rp}");
    }

    #[test]
    fn constants_are_accurate() {
        let s2 = sqrt2_rational(50);
        let err = (&s2 * &s2 - big(2)).to_f64().unwrap().abs();
        assert!(err < 1e-48);
        let l2 = ln2_rational(80).to_f64().unwrap();
        assert!((l2 - std::f64::consts::LN_2).abs() < 1e-15);
        let ie = inv_e_rational(60).to_f64().unwrap();
        assert!((ie - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn fixed_point_eval_matches_rational() {
        let a = solve_polya_series(80).unwrap();
        let x = ratio(3, 10);
        let shift = 192u32;
        let xi = bigint_shifted(&x, shift);
        let fixed = a.eval_fixed(&xi, shift);
        let exact = a.eval_rational(&x);
        let diff = (rational_from_shifted(&fixed, shift) - exact)
            .to_f64()
            .unwrap()
            .abs();
        assert!(diff < 1e-45);
    }
}
