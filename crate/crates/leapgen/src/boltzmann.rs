//! Boltzmann samplers for the component classes, at or below the
//! singularity of the composed class.
//!
//! Walk components are pairs of geometric runs. Tree components follow the
//! recursive multiset/cycle samplers driven by tables of `A(x^m)`: a node at
//! "level" m (Boltzmann parameter `x^m`) draws index groups whose members
//! are generated once and copied, so replicated subtrees are exact copies.
//! Generation is iterative with an explicit frame stack; a finished subtree
//! occupies a contiguous arena range, which makes copying a memcpy with an
//! index offset.

use rand::Rng;

use crate::error::{Error, Result};
use crate::objects::{Tree, NO_NODE};
use crate::scheme::{SchemeId, SchemeSpec};
use crate::series::{build_eval_table, divisors, euler_phi, EvalTable};

// ---------------------------------------------------------------------------
// Primitive distributions.
// ---------------------------------------------------------------------------

pub fn bernoulli<R: Rng + ?Sized>(p: f64, rng: &mut R) -> bool {
    debug_assert!((0.0..=1.0).contains(&p));
    rng.gen::<f64>() < p
}

/// Geometric law `P(i) = (1-p) p^i`, i >= 0.
pub fn geometric<R: Rng + ?Sized>(p: f64, rng: &mut R) -> u64 {
    debug_assert!((0.0..1.0).contains(&p));
    if p == 0.0 {
        return 0;
    }
    let mut i = 0u64;
    while rng.gen::<f64>() < p {
        i += 1;
    }
    i
}

/// Poisson by sequential CDF inversion; intended for the small rates that
/// appear in the multiset samplers.
pub fn poisson<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> u64 {
    debug_assert!(lambda >= 0.0);
    let mut u: f64 = rng.gen();
    let mut pmf = (-lambda).exp();
    let mut k = 0u64;
    while u > pmf {
        u -= pmf;
        k += 1;
        pmf *= lambda / k as f64;
        if k > 1_000_000 {
            break;
        }
    }
    k
}

/// Poisson conditioned to be >= 1, by inversion on the shifted CDF.
pub fn poisson_ge1<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> u64 {
    debug_assert!(lambda > 0.0);
    let norm = -(-lambda).exp_m1(); // 1 - e^-lambda
    let mut u: f64 = rng.gen::<f64>() * norm;
    let mut pmf = lambda * (-lambda).exp();
    let mut k = 1u64;
    while u > pmf {
        u -= pmf;
        k += 1;
        pmf *= lambda / k as f64;
        if k > 1_000_000 {
            break;
        }
    }
    k
}

/// Logarithmic law `P(m) = y^m / (m L)`, `L = log(1/(1-y))`, m >= 1.
pub fn log_series<R: Rng + ?Sized>(y: f64, rng: &mut R) -> u64 {
    debug_assert!((0.0..1.0).contains(&y));
    let norm = -(1.0 - y).ln();
    let mut u: f64 = rng.gen::<f64>() * norm;
    let mut term = y;
    let mut m = 1u64;
    loop {
        let pmf = term / m as f64;
        if u <= pmf || term < 1e-300 {
            return m;
        }
        u -= pmf;
        m += 1;
        term *= y;
    }
}

/// Logarithmic law conditioned to m >= 2.
pub fn log_series_ge2<R: Rng + ?Sized>(y: f64, rng: &mut R) -> u64 {
    debug_assert!((0.0..1.0).contains(&y));
    let norm = -(1.0 - y).ln() - y;
    let mut u: f64 = rng.gen::<f64>() * norm;
    let mut term = y * y;
    let mut m = 2u64;
    loop {
        let pmf = term / m as f64;
        if u <= pmf || term < 1e-300 {
            return m;
        }
        u -= pmf;
        m += 1;
        term *= y;
    }
}

// ---------------------------------------------------------------------------
// Maximum-index tables.
// ---------------------------------------------------------------------------

/// Cumulative maximum-index law for a multiset sampler at level `level`:
/// `P(K <= k) = exp(-sum_{j>k} lambda_j)` with `lambda_j = A(x^{level j})/j`.
/// This is the partial-product form normalized by the full product.
#[derive(Clone, Debug)]
pub struct MaxIndexCdf {
    pub level: usize,
    /// lambda_j at index j-1.
    pub lambdas: Vec<f64>,
    /// exp(-lambda_j), for the per-index Poisson draws.
    pub exp_neg: Vec<f64>,
    /// cdf[k] = P(K <= k), k = 0..=J.
    pub cdf: Vec<f64>,
}

impl MaxIndexCdf {
    fn build(table: &EvalTable, level: usize) -> MaxIndexCdf {
        let mut lambdas = Vec::new();
        let mut j = 1usize;
        loop {
            let lam = table.value(level * j) / j as f64;
            lambdas.push(lam);
            if lam < 1e-19 && j >= 2 {
                break;
            }
            j += 1;
            if j > 65_536 {
                break;
            }
        }
        // residual mass beyond the last stored index: value(level j) shrinks
        // at least geometrically with ratio x^level
        let jmax = lambdas.len();
        let resid = table.value(level * (jmax + 1)) / (jmax + 1) as f64
            / (1.0 - table.x.powi(level as i32)).max(0.5);
        let mut cdf = vec![0.0; jmax + 1];
        let mut tail = resid;
        for k in (0..=jmax).rev() {
            cdf[k] = (-tail).exp();
            if k > 0 {
                tail += lambdas[k - 1];
            }
        }
        let exp_neg = lambdas.iter().map(|l| (-l).exp()).collect();
        MaxIndexCdf {
            level,
            lambdas,
            exp_neg,
            cdf,
        }
    }

    /// Draws K by inversion; beyond the stored range the table fallback
    /// extends the tail rather than truncating it.
    pub fn draw<R: Rng + ?Sized>(&self, table: &EvalTable, rng: &mut R) -> usize {
        let u: f64 = rng.gen();
        // the mass is concentrated at small k: linear scan
        for (k, c) in self.cdf.iter().enumerate() {
            if u <= *c {
                return k;
            }
        }
        // extension path, probability below the table tolerance
        let mut k = self.cdf.len() - 1;
        let mut tail = -(self.cdf.last().unwrap().ln());
        loop {
            k += 1;
            tail -= table.value(self.level * k) / k as f64;
            if u <= (-tail.max(0.0)).exp() || k > 1_000_000 {
                return k;
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Component samplers.
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Payload {
    /// Pair of horizontal run lengths for walk components.
    Runs(u32, u32),
    /// Root of a tree component in the shared arena.
    TreeRoot(u32),
}

/// One draw of the component sampler, with its declared size.
#[derive(Clone, Copy, Debug)]
pub struct BComponent {
    pub size: usize,
    pub payload: Payload,
}

#[derive(Clone, Debug)]
enum SamplerKind {
    Walk {
        run_p: f64,
        base_size: usize,
    },
    Tree(TreeTables),
}

#[derive(Clone, Debug)]
enum TreeTables {
    Polya {
        /// Per level m (index m-1): maximum-index CDF.
        levels: Vec<MaxIndexCdf>,
    },
    Phylo {
        /// (p_leaf, p_pair) per level; remaining mass doubles the level.
        levels: Vec<(f64, f64)>,
    },
    Kary {
        k: usize,
        /// per level: (t_leaf, branches (d, cum weight)); weights normalized
        /// during the draw.
        levels: Vec<(f64, Vec<(usize, f64)>)>,
    },
    SMobile {
        /// per level: (t_leaf, branches (d, weight, y = A(x^{level d})))
        levels: Vec<(f64, Vec<(usize, f64, f64)>)>,
    },
}

/// Boltzmann sampler for the component class of a scheme, prepared at a
/// fixed parameter (the scheme singularity unless overridden). Immutable
/// after construction; draws write nodes into a caller-supplied arena.
#[derive(Clone, Debug)]
pub struct ComponentSampler {
    pub x: f64,
    kind: SamplerKind,
    table: Option<EvalTable>,
    /// number of levels with cached branch data
    max_level: usize,
}

pub const DEFAULT_TABLE_EPS: f64 = 1e-12;

impl ComponentSampler {
    /// Sampler at the scheme singularity.
    pub fn new(spec: &SchemeSpec) -> Result<ComponentSampler> {
        ComponentSampler::new_at(spec, spec.rho)
    }

    /// Sampler at parameter `x <= rho`.
    pub fn new_at(spec: &SchemeSpec, x: f64) -> Result<ComponentSampler> {
        if !(x > 0.0) || x > spec.rho * (1.0 + 1e-12) {
            return Err(Error::InvalidParameter(format!(
                "component sampler needs 0 < x <= rho, got x={x}, rho={}",
                spec.rho
            )));
        }
        match spec.id {
            SchemeId::Motzkin => {
                use num_traits::ToPrimitive;
                Ok(ComponentSampler {
                    x,
                    kind: SamplerKind::Walk {
                        run_p: spec.weight_u.to_f64().unwrap() * x,
                        base_size: 2,
                    },
                    table: None,
                    max_level: 0,
                })
            }
            SchemeId::Schroder => Ok(ComponentSampler {
                x,
                kind: SamplerKind::Walk {
                    run_p: x,
                    base_size: 1,
                },
                table: None,
                max_level: 0,
            }),
            _ => {
                let a = spec
                    .a_tilde_series
                    .as_ref()
                    .expect("tree schemes carry their counting series");
                let at_singularity = (x - spec.rho).abs() < 1e-12;
                let first = if at_singularity { spec.tau_c } else { None };
                let table = build_eval_table(a, x, DEFAULT_TABLE_EPS, first)?;
                let max_level = ((-18.0 * std::f64::consts::LN_10) / x.ln()).ceil() as usize + 1;
                let max_level = max_level.min(4096).max(2);
                let kind = SamplerKind::Tree(build_tree_tables(spec, &table, x, max_level));
                Ok(ComponentSampler {
                    x,
                    kind,
                    table: Some(table),
                    max_level,
                })
            }
        }
    }

    pub fn eval_table(&self) -> Option<&EvalTable> {
        self.table.as_ref()
    }

    /// One component draw (the `Gamma B` call of the leap loop).
    pub fn draw_b<R: Rng + ?Sized>(&self, buf: &mut Tree, rng: &mut R) -> BComponent {
        match &self.kind {
            SamplerKind::Walk { run_p, base_size } => {
                let i = geometric(*run_p, rng) as u32;
                let j = geometric(*run_p, rng) as u32;
                BComponent {
                    size: *base_size + i as usize + j as usize,
                    payload: Payload::Runs(i, j),
                }
            }
            SamplerKind::Tree(tables) => {
                let (root, size) = self.draw_tree(buf, tables, 1, true, rng);
                BComponent {
                    size,
                    payload: Payload::TreeRoot(root),
                }
            }
        }
    }

    /// First-component draw for walk schemes: a geometric run length.
    pub fn draw_d<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<u64> {
        match &self.kind {
            SamplerKind::Walk { run_p, .. } => Some(geometric(*run_p, rng)),
            SamplerKind::Tree(_) => None,
        }
    }

    /// Plain Boltzmann draw from the composed unlabeled class at `x^level`
    /// (the auxiliary `Gamma A~` sampler of the tree schemes).
    pub fn draw_atilde<R: Rng + ?Sized>(
        &self,
        buf: &mut Tree,
        level: usize,
        rng: &mut R,
    ) -> (u32, usize) {
        match &self.kind {
            SamplerKind::Walk { .. } => panic!("walk schemes have no tree sampler"),
            SamplerKind::Tree(tables) => self.draw_tree(buf, tables, level, false, rng),
        }
    }

    fn draw_tree<R: Rng + ?Sized>(
        &self,
        buf: &mut Tree,
        tables: &TreeTables,
        level: usize,
        root_is_component: bool,
        rng: &mut R,
    ) -> (u32, usize) {
        let counts_vertices = matches!(tables, TreeTables::Polya { .. });
        struct Frame {
            node: u32,
            size: usize,
            interleave: usize,
            reqs: Vec<(usize, usize)>, // (child level, copies) per original
            next_req: usize,
            groups: Vec<Vec<u32>>,
        }
        let mut stack: Vec<Frame> = Vec::new();
        let root = buf.new_node();
        let (reqs, il) = self.draw_reqs(tables, level, root_is_component, rng);
        let base = |has_children: bool| -> usize {
            if counts_vertices {
                1
            } else if has_children {
                0
            } else {
                1
            }
        };
        stack.push(Frame {
            node: root,
            size: base(!reqs.is_empty()),
            interleave: il,
            reqs,
            next_req: 0,
            groups: Vec::new(),
        });
        loop {
            let start_child = {
                let top = stack.last().unwrap();
                top.next_req < top.reqs.len()
            };
            if start_child {
                let lvl = {
                    let top = stack.last().unwrap();
                    top.reqs[top.next_req].0
                };
                let child = buf.new_node();
                let (creqs, cil) = self.draw_reqs(tables, lvl, false, rng);
                stack.push(Frame {
                    node: child,
                    size: base(!creqs.is_empty()),
                    interleave: cil,
                    reqs: creqs,
                    next_req: 0,
                    groups: Vec::new(),
                });
                continue;
            }
            let f = stack.pop().unwrap();
            // arrange children: groups hold each original with its copies
            if !f.groups.is_empty() {
                let mut last = NO_NODE;
                if f.interleave <= 1 {
                    for g in &f.groups {
                        for &c in g {
                            buf.append_child(f.node, c, &mut last);
                        }
                    }
                } else {
                    for rep in 0..f.interleave {
                        for g in &f.groups {
                            buf.append_child(f.node, g[rep], &mut last);
                        }
                    }
                }
            }
            match stack.last_mut() {
                None => return (f.node, f.size),
                Some(parent) => {
                    let (_, copies) = parent.reqs[parent.next_req];
                    parent.next_req += 1;
                    let end = buf.len() as u32;
                    let mut ids = Vec::with_capacity(copies);
                    ids.push(f.node);
                    for _ in 1..copies {
                        ids.push(buf.copy_subtree_range(f.node, end));
                    }
                    parent.groups.push(ids);
                    parent.size += copies * f.size;
                }
            }
        }
    }

    /// Child requests for a node at `level`. Each entry is one original to
    /// draw (child level, number of copies); `interleave > 1` lays the copies
    /// out as a repeated pattern, which is the cyclic arrangement of the
    /// mobile classes.
    fn draw_reqs<R: Rng + ?Sized>(
        &self,
        tables: &TreeTables,
        level: usize,
        component_root: bool,
        rng: &mut R,
    ) -> (Vec<(usize, usize)>, usize) {
        if level > self.max_level {
            // Boltzmann parameter below 1e-18: a leaf to table accuracy
            return (Vec::new(), 1);
        }
        let table = self.table.as_ref().unwrap();
        match tables {
            TreeTables::Polya { levels } => {
                let plan = &levels[level - 1];
                let k0 = plan.draw(table, rng);
                let min_index = if component_root { 2 } else { 1 };
                if k0 < min_index {
                    return (Vec::new(), 1);
                }
                let mut reqs = Vec::new();
                for j in min_index..=k0 {
                    let lam = plan
                        .lambdas
                        .get(j - 1)
                        .copied()
                        .unwrap_or_else(|| table.value(level * j) / j as f64);
                    let count = if j == k0 {
                        poisson_ge1(lam, rng)
                    } else if let Some(en) = plan.exp_neg.get(j - 1) {
                        poisson_with_exp(lam, *en, rng)
                    } else {
                        poisson(lam, rng)
                    };
                    for _ in 0..count {
                        reqs.push((level * j, j));
                    }
                }
                (reqs, 1)
            }
            TreeTables::Phylo { levels } => {
                if component_root {
                    // leaf with probability x/B(x), else one level-2 subtree
                    // copied twice
                    let t_leaf = self.x;
                    let t_double = 0.5 * table.value(2);
                    if rng.gen::<f64>() * (t_leaf + t_double) < t_leaf {
                        (Vec::new(), 1)
                    } else {
                        (vec![(2, 2)], 1)
                    }
                } else {
                    let (p_leaf, p_pair) = levels[level - 1];
                    let u: f64 = rng.gen();
                    if u < p_leaf {
                        (Vec::new(), 1)
                    } else if u < p_leaf + p_pair {
                        (vec![(level, 1), (level, 1)], 1)
                    } else {
                        (vec![(2 * level, 2)], 1)
                    }
                }
            }
            TreeTables::Kary { k, levels } => {
                let (t_leaf, branches) = &levels[level - 1];
                let mut total = if component_root { self.x.powi(level as i32) } else { *t_leaf };
                // for the component root, d = 1 (the asymmetric branch) is
                // excluded; recompute the normalization accordingly
                let usable: Vec<(usize, f64)> = branches
                    .iter()
                    .filter(|(d, _)| !component_root || *d > 1)
                    .cloned()
                    .collect();
                total += usable.iter().map(|(_, w)| *w).sum::<f64>();
                let mut u = rng.gen::<f64>() * total;
                let leaf_w = if component_root {
                    self.x.powi(level as i32)
                } else {
                    *t_leaf
                };
                if u < leaf_w {
                    return (Vec::new(), 1);
                }
                u -= leaf_w;
                for (d, w) in &usable {
                    if u < *w {
                        let originals = k / d;
                        let reqs = vec![(level * d, *d); originals];
                        return (reqs, *d);
                    }
                    u -= *w;
                }
                (Vec::new(), 1)
            }
            TreeTables::SMobile { levels } => {
                let (t_leaf, branches) = &levels[level - 1];
                let usable: Vec<(usize, f64, f64)> = branches
                    .iter()
                    .filter(|(d, _, _)| !component_root || *d > 1)
                    .cloned()
                    .collect();
                let total = t_leaf + usable.iter().map(|(_, w, _)| *w).sum::<f64>();
                let mut u = rng.gen::<f64>() * total;
                if u < *t_leaf {
                    return (Vec::new(), 1);
                }
                u -= *t_leaf;
                for (d, w, y) in &usable {
                    if u < *w {
                        let count = if *d == 1 {
                            log_series_ge2(*y, rng)
                        } else {
                            log_series(*y, rng)
                        } as usize;
                        let reqs = vec![(level * d, *d); count];
                        return (reqs, *d);
                    }
                    u -= *w;
                }
                (Vec::new(), 1)
            }
        }
    }
}

fn poisson_with_exp<R: Rng + ?Sized>(lambda: f64, exp_neg: f64, rng: &mut R) -> u64 {
    let mut u: f64 = rng.gen();
    let mut pmf = exp_neg;
    let mut k = 0u64;
    while u > pmf {
        u -= pmf;
        k += 1;
        pmf *= lambda / k as f64;
        if k > 1_000_000 {
            break;
        }
    }
    k
}

fn build_tree_tables(spec: &SchemeSpec, table: &EvalTable, x: f64, max_level: usize) -> TreeTables {
    match spec.id {
        SchemeId::Polya => {
            let levels = (1..=max_level)
                .map(|m| MaxIndexCdf::build(table, m))
                .collect();
            TreeTables::Polya { levels }
        }
        SchemeId::Phylo => {
            let levels = (1..=max_level)
                .map(|m| {
                    let a = table.value(m);
                    let t_leaf = x.powi(m as i32);
                    let t_pair = 0.5 * a * a;
                    let t_double = 0.5 * table.value(2 * m);
                    let total = t_leaf + t_pair + t_double;
                    (t_leaf / total, t_pair / total)
                })
                .collect();
            TreeTables::Phylo { levels }
        }
        SchemeId::KaryMobile(k) => {
            let divs = divisors(k as u64);
            let levels = (1..=max_level)
                .map(|m| {
                    let t_leaf = x.powi(m as i32);
                    let branches = divs
                        .iter()
                        .map(|&d| {
                            let d = d as usize;
                            let w = euler_phi(d as u64) as f64 / k as f64
                                * table.value(m * d).powi((k / d) as i32);
                            (d, w)
                        })
                        .collect();
                    (t_leaf, branches)
                })
                .collect();
            TreeTables::Kary { k, levels }
        }
        SchemeId::SchroderMobile => {
            let levels = (1..=max_level)
                .map(|m| {
                    let t_leaf = x.powi(m as i32);
                    let mut branches = Vec::new();
                    // d = 1: cycles of length >= 2 with trivial rotation
                    let y1 = table.value(m);
                    let w1 = -(1.0 - y1).ln() - y1;
                    if w1 > 1e-19 {
                        branches.push((1usize, w1, y1));
                    }
                    for d in 2..=64usize {
                        let y = table.value(m * d);
                        let w = euler_phi(d as u64) as f64 / d as f64 * (-(1.0 - y).ln());
                        if w < 1e-19 {
                            break;
                        }
                        branches.push((d, w, y));
                    }
                    (t_leaf, branches)
                })
                .collect();
            TreeTables::SMobile { levels }
        }
        _ => unreachable!("walk schemes do not build tree tables"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use crate::scheme::SchemeSpec;
    use std::collections::HashMap;

    #[test]
    fn primitive_edge_cases() {
        let mut rng = rng_from_seed(1);
        assert_eq!(geometric(0.0, &mut rng), 0);
        assert!(bernoulli(1.0, &mut rng));
        assert!(!bernoulli(0.0, &mut rng));
        assert!(poisson_ge1(0.3, &mut rng) >= 1);
        assert!(log_series(0.4, &mut rng) >= 1);
        assert!(log_series_ge2(0.4, &mut rng) >= 2);
    }

    #[test]
    fn primitive_means() {
        let mut rng = rng_from_seed(2);
        let n = 200_000;
        let mean = |f: &mut dyn FnMut(&mut rand_chacha::ChaCha8Rng) -> f64,
                    rng: &mut rand_chacha::ChaCha8Rng| {
            (0..n).map(|_| f(rng)).sum::<f64>() / n as f64
        };
        let m = mean(&mut |r| geometric(1.0 / 3.0, r) as f64, &mut rng);
        assert!((m - 0.5).abs() < 0.01, "geom mean {m}");
        let lam = 0.7;
        let m = mean(&mut |r| poisson_ge1(lam, r) as f64, &mut rng);
        let want = lam / (1.0 - (-lam).exp());
        assert!((m - want).abs() < 0.02, "pois>=1 mean {m} want {want}");
        let y = 0.45;
        let m = mean(&mut |r| log_series(y, r) as f64, &mut rng);
        let want = -y / ((1.0 - y) * (1.0 - y).ln());
        assert!((m - want).abs() < 0.02, "log-series mean {m} want {want}");
    }

    #[test]
    fn motzkin_component_law() {
        let spec = SchemeSpec::motzkin();
        let comp = ComponentSampler::new(&spec).unwrap();
        let mut rng = rng_from_seed(3);
        let mut buf = Tree::new();
        let n = 200_000;
        let mut size2 = 0usize;
        let mut total = 0usize;
        for _ in 0..n {
            let c = comp.draw_b(&mut buf, &mut rng);
            assert!(c.size >= 2);
            total += c.size;
            if c.size == 2 {
                size2 += 1;
            }
        }
        let mean = total as f64 / n as f64;
        assert!((mean - 3.0).abs() < 0.02, "mean {mean}");
        let p2 = size2 as f64 / n as f64;
        assert!((p2 - 4.0 / 9.0).abs() < 0.01, "P(size 2) = {p2}");
    }

    #[test]
    fn polya_component_structure() {
        let spec = SchemeSpec::polya().unwrap();
        let comp = ComponentSampler::new(&spec).unwrap();
        let mut rng = rng_from_seed(4);
        let mut buf = Tree::new();
        for _ in 0..3000 {
            buf.clear();
            let c = comp.draw_b(&mut buf, &mut rng);
            let root = match c.payload {
                Payload::TreeRoot(r) => r,
                _ => unreachable!(),
            };
            buf.set_root(root);
            assert_eq!(buf.subtree_size(root), c.size, "declared size");
            assert_ne!(c.size, 2, "component sizes skip 2");
            // every distinct child subtree of the root appears >= 2 times
            let mut counts: HashMap<String, usize> = HashMap::new();
            let kids: Vec<u32> = buf.children(root).collect();
            for k in kids {
                // canonical form of the subtree rooted at k
                let mut sub = Tree::new();
                let r2 = copy_into(&buf, k, &mut sub);
                sub.set_root(r2);
                *counts.entry(sub.canonical_unordered()).or_default() += 1;
            }
            for (_, c) in counts {
                assert!(c >= 2, "replicated multiset violated");
            }
        }
    }

    fn copy_into(src: &Tree, v: u32, dst: &mut Tree) -> u32 {
        let n = dst.new_node();
        let kids: Vec<u32> = src.children(v).collect();
        for k in kids.into_iter().rev() {
            let c = copy_into(src, k, dst);
            dst.attach_child(n, c);
        }
        n
    }

    #[test]
    fn phylo_component_structure() {
        let spec = SchemeSpec::phylo().unwrap();
        let comp = ComponentSampler::new(&spec).unwrap();
        let mut rng = rng_from_seed(5);
        let mut buf = Tree::new();
        let mut leaves = 0usize;
        let n = 20_000;
        for _ in 0..n {
            buf.clear();
            let c = comp.draw_b(&mut buf, &mut rng);
            let root = match c.payload {
                Payload::TreeRoot(r) => r,
                _ => unreachable!(),
            };
            buf.set_root(root);
            if c.size == 1 {
                leaves += 1;
                assert!(buf.is_leaf(root));
            } else {
                assert_eq!(c.size % 2, 0, "doubled case has even leaf count");
                assert_eq!(buf.leaf_count() as usize, c.size);
                // the two subtrees are identical copies
                let kids: Vec<u32> = buf.children(root).collect();
                assert_eq!(kids.len(), 2);
                let mut t1 = Tree::new();
                let r1 = copy_into(&buf, kids[0], &mut t1);
                t1.set_root(r1);
                let mut t2 = Tree::new();
                let r2 = copy_into(&buf, kids[1], &mut t2);
                t2.set_root(r2);
                assert_eq!(t1.to_parens(), t2.to_parens());
            }
        }
        // P(leaf) = x/B(x) = rho/(1/2) = 2 rho
        let p = leaves as f64 / n as f64;
        let want = 2.0 * spec.rho;
        assert!((p - want).abs() < 0.01, "leaf prob {p} want {want}");
    }

    #[test]
    fn ternary_mobile_component_support() {
        let spec = SchemeSpec::kary_mobile(3).unwrap();
        let comp = ComponentSampler::new(&spec).unwrap();
        let mut rng = rng_from_seed(6);
        let mut buf = Tree::new();
        for _ in 0..20_000 {
            buf.clear();
            let c = comp.draw_b(&mut buf, &mut rng);
            assert_eq!(c.size % 2, 1, "component sizes are 1 mod k-1");
            if let Payload::TreeRoot(r) = c.payload {
                buf.set_root(r);
                assert_eq!(buf.leaf_count() as usize, c.size);
                for v in 0..buf.len() as u32 {
                    let ch = buf.child_count(v);
                    assert!(ch == 0 || ch == 3);
                }
            }
        }
    }

    #[test]
    fn schroder_mobile_component_no_unary() {
        let spec = SchemeSpec::schroder_mobile().unwrap();
        let comp = ComponentSampler::new(&spec).unwrap();
        let mut rng = rng_from_seed(7);
        let mut buf = Tree::new();
        for _ in 0..20_000 {
            buf.clear();
            let c = comp.draw_b(&mut buf, &mut rng);
            if let Payload::TreeRoot(r) = c.payload {
                buf.set_root(r);
                assert_eq!(buf.leaf_count() as usize, c.size);
                for v in 0..buf.len() as u32 {
                    let ch = buf.child_count(v);
                    assert!(ch == 0 || ch >= 2);
                }
            }
        }
    }

    #[test]
    fn max_index_cdf_monotone_and_matches_products() {
        let spec = SchemeSpec::polya().unwrap();
        let comp = ComponentSampler::new(&spec).unwrap();
        let table = comp.eval_table().unwrap();
        let plan = MaxIndexCdf::build(table, 1);
        for w in plan.cdf.windows(2) {
            assert!(w[0] <= w[1] + 1e-15, "cdf must be non-decreasing");
        }
        // P(K <= k) = prod_{j<=k} exp(lambda_j) / prod_{j} exp(lambda_j)
        let full: f64 = plan.lambdas.iter().sum();
        for k in 0..plan.cdf.len().min(6) {
            let partial: f64 = plan.lambdas.iter().take(k).sum();
            let want = (partial - full).exp();
            assert!(
                (plan.cdf[k] - want).abs() < 1e-9,
                "cdf[{k}] = {} want {want}",
                plan.cdf[k]
            );
        }
        // x -> 0: K <= 1 almost surely
        let x = 1e-6;
        let t = build_eval_table(spec.a_tilde_series.as_ref().unwrap(), x, 1e-12, None).unwrap();
        let small = MaxIndexCdf::build(&t, 1);
        assert!(small.cdf[1] > 1.0 - 1e-5);
    }

    #[test]
    fn gamma_atilde_single_vertex_probability() {
        // P(single vertex) = x / A(x) at x = 0.3
        let spec = SchemeSpec::polya().unwrap();
        let comp = ComponentSampler::new_at(&spec, 0.3).unwrap();
        let (a_val, _) = spec
            .a_tilde_series
            .as_ref()
            .unwrap()
            .eval_f64_with_tail(0.3)
            .unwrap();
        let mut rng = rng_from_seed(8);
        let mut buf = Tree::new();
        let n = 100_000;
        let mut singles = 0usize;
        let mut total = 0usize;
        for _ in 0..n {
            buf.clear();
            let (_, size) = comp.draw_atilde(&mut buf, 1, &mut rng);
            total += size;
            if size == 1 {
                singles += 1;
            }
        }
        let p = singles as f64 / n as f64;
        let want = 0.3 / a_val;
        assert!((p - want).abs() < 4.0 * (want * (1.0 - want) / n as f64).sqrt() + 0.003);
        // mean size = x A'(x)/A(x)
        let m = crate::series::boltzmann_moments(spec.a_tilde_series.as_ref().unwrap(), 0.3)
            .unwrap();
        let mean = total as f64 / n as f64;
        assert!((mean - m.mu).abs() < 0.05, "mean {mean} want {}", m.mu);
    }
}
