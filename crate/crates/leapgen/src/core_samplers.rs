//! Exact-size uniform samplers for the core classes.
//!
//! Dyck walks use the cycle lemma, rooted labeled trees a linear-time Prufer
//! decode, leaf-labeled binary trees sequential leaf insertion, and the
//! mobile classes a conditioned Galton-Watson draw (degree counts, uniform
//! shuffle, cycle-lemma rotation). Labels are never materialized: every
//! sampler returns the shape, whose law is the push-forward of the uniform
//! labeled law.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::objects::{LatticeWalk, Step, Tree, NO_NODE};

/// Start index of the unique rotation with all prefix sums positive.
/// `steps` must sum to +1.
pub(crate) fn dominating_rotation(steps: &[i64]) -> usize {
    debug_assert_eq!(steps.iter().sum::<i64>(), 1);
    let mut sum = 0i64;
    let mut min = i64::MAX;
    let mut arg = 0usize;
    for (i, s) in steps.iter().enumerate() {
        sum += s;
        if sum <= min {
            min = sum;
            arg = i + 1;
        }
    }
    arg % steps.len()
}

/// Start index of the unique rotation that is a Lukasiewicz path (prefix
/// sums nonnegative until the final step). `steps` must sum to -1.
pub(crate) fn lukasiewicz_rotation(steps: &[i64]) -> usize {
    debug_assert_eq!(steps.iter().sum::<i64>(), -1);
    let mut sum = 0i64;
    let mut min = i64::MAX;
    let mut arg = 0usize;
    for (i, s) in steps.iter().enumerate() {
        sum += s;
        if sum < min {
            min = sum;
            arg = i + 1;
        }
    }
    arg % steps.len()
}

/// Uniform Dyck walk of semilength `k` in O(k): shuffle k+1 rises and k
/// falls, rotate to the unique dominating arrangement, drop the leading
/// rise.
pub fn dyck_uniform<R: Rng + ?Sized>(k: usize, rng: &mut R) -> LatticeWalk {
    if k == 0 {
        return LatticeWalk { steps: Vec::new() };
    }
    let mut arr: Vec<i64> = Vec::with_capacity(2 * k + 1);
    arr.extend(std::iter::repeat(1).take(k + 1));
    arr.extend(std::iter::repeat(-1).take(k));
    arr.shuffle(rng);
    let start = dominating_rotation(&arr);
    let m = arr.len();
    let mut steps = Vec::with_capacity(2 * k);
    for i in 1..m {
        let s = arr[(start + i) % m];
        steps.push(if s == 1 { Step::Up } else { Step::Down });
    }
    LatticeWalk { steps }
}

/// Uniform rooted labeled tree on `k` vertices (k^{k-1} of them), returned
/// as its shape. Prufer decode in O(k), then a uniformly chosen root.
pub fn cayley_uniform<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Tree {
    assert!(k >= 1);
    if k == 1 {
        return Tree::singleton();
    }
    if k == 2 {
        let mut t = Tree::new();
        let r = t.new_node();
        t.set_root(r);
        let c = t.new_node();
        t.attach_child(r, c);
        return t;
    }
    let prufer: Vec<u32> = (0..k - 2).map(|_| rng.gen_range(0..k as u32)).collect();
    let mut degree = vec![1u32; k];
    for &a in &prufer {
        degree[a as usize] += 1;
    }
    let mut edges: Vec<(u32, u32)> = Vec::with_capacity(k - 1);
    // pointer-scan decode
    let mut ptr = 0usize;
    while degree[ptr] != 1 {
        ptr += 1;
    }
    let mut leaf = ptr as u32;
    for &a in &prufer {
        edges.push((leaf, a));
        degree[a as usize] -= 1;
        if degree[a as usize] == 1 && (a as usize) < ptr {
            leaf = a;
        } else {
            ptr += 1;
            while degree[ptr] != 1 {
                ptr += 1;
            }
            leaf = ptr as u32;
        }
    }
    edges.push((leaf, (k - 1) as u32));

    // CSR adjacency
    let mut deg = vec![0u32; k];
    for &(a, b) in &edges {
        deg[a as usize] += 1;
        deg[b as usize] += 1;
    }
    let mut off = vec![0u32; k + 1];
    for i in 0..k {
        off[i + 1] = off[i] + deg[i];
    }
    let mut adj = vec![0u32; 2 * (k - 1)];
    let mut fill = off.clone();
    for &(a, b) in &edges {
        adj[fill[a as usize] as usize] = b;
        fill[a as usize] += 1;
        adj[fill[b as usize] as usize] = a;
        fill[b as usize] += 1;
    }

    // orient away from a uniform root
    let root = rng.gen_range(0..k as u32);
    let mut tree = Tree::with_capacity(k);
    for _ in 0..k {
        tree.new_node();
    }
    tree.set_root(root);
    let mut stack = vec![(root, NO_NODE)];
    while let Some((v, parent)) = stack.pop() {
        for i in off[v as usize]..off[v as usize + 1] {
            let u = adj[i as usize];
            if u != parent {
                tree.attach_child(v, u);
                stack.push((u, v));
            }
        }
    }
    tree
}

/// Uniform leaf-labeled unordered binary tree with `k` leaves
/// ((2k-3)!! of them), as its shape. Leaf `j+1` subdivides one of the
/// `2j-1` edges (counting a phantom edge above the root).
pub fn phylo_uniform<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Tree {
    assert!(k >= 1);
    let total = 2 * k - 1;
    let mut parent = vec![NO_NODE; total];
    let mut next = 1usize; // node 0 is the initial leaf
    let mut root = 0u32;
    for j in 1..k {
        // nodes present: 2j-1, ids 0..next
        let v = rng.gen_range(0..(2 * j - 1) as u32);
        let w = next as u32;
        let leaf = (next + 1) as u32;
        next += 2;
        parent[w as usize] = parent[v as usize];
        parent[v as usize] = w;
        parent[leaf as usize] = w;
        if v == root {
            root = w;
        }
    }
    let mut tree = Tree::with_capacity(total);
    for _ in 0..next {
        tree.new_node();
    }
    tree.set_root(root);
    for v in 0..next as u32 {
        let p = parent[v as usize];
        if p != NO_NODE {
            tree.attach_child(p, v);
        }
    }
    tree
}

/// Builds the tree whose preorder outdegree sequence is `outdeg` (already a
/// valid Lukasiewicz arrangement).
fn tree_from_preorder_degrees(outdeg: impl Iterator<Item = u32>, size: usize) -> Tree {
    let mut tree = Tree::with_capacity(size);
    // stack of (node, remaining children, last attached child)
    let mut stack: Vec<(u32, u32, u32)> = Vec::new();
    let mut root = NO_NODE;
    for d in outdeg {
        let v = tree.new_node();
        if let Some(top) = stack.last_mut() {
            if top.2 == NO_NODE {
                tree.set_first_child(top.0, v);
            } else {
                tree.set_next_sibling(top.2, v);
            }
            top.2 = v;
            top.1 -= 1;
        } else {
            root = v;
        }
        if d > 0 {
            stack.push((v, d, NO_NODE));
        }
        while let Some(top) = stack.last() {
            if top.1 == 0 {
                stack.pop();
            } else {
                break;
            }
        }
    }
    debug_assert!(stack.is_empty());
    tree.set_root(root);
    tree
}

/// Uniform k-ary plane tree with `leaves` leaves, equivalently the shape
/// push-forward of uniform leaf-labeled k-ary mobiles. The outdegree
/// multiset is deterministic (m internal nodes of degree k), so a uniform
/// shuffle plus cycle-lemma rotation is exact and O(n).
pub fn kary_mobile_uniform<R: Rng + ?Sized>(k: usize, leaves: usize, rng: &mut R) -> Result<Tree> {
    if k < 2 {
        return Err(Error::InvalidParameter("mobile arity must be >= 2".into()));
    }
    if leaves == 0 || (leaves - 1) % (k - 1) != 0 {
        return Err(Error::UnsupportedSize {
            class: format!("mobile:{k}"),
            n: leaves,
            detail: format!("leaf counts are 1 mod {}", k - 1),
        });
    }
    if leaves == 1 {
        return Ok(Tree::singleton());
    }
    let m = (leaves - 1) / (k - 1);
    let total = leaves + m;
    let mut deg: Vec<u32> = Vec::with_capacity(total);
    deg.extend(std::iter::repeat(k as u32).take(m));
    deg.extend(std::iter::repeat(0u32).take(leaves));
    deg.shuffle(rng);
    let steps: Vec<i64> = deg.iter().map(|&d| d as i64 - 1).collect();
    let start = lukasiewicz_rotation(&steps);
    let seq = (0..total).map(|i| deg[(start + i) % total]);
    Ok(tree_from_preorder_degrees(seq, total))
}

/// Offspring tables for the Galton-Watson form `A(z) = z Phi(A(z))` of
/// mobiles with no unary node, tilted at the critical value tau = 1/2.
struct SchroderMobileTables {
    /// phi[j] = [y^j] 1/(1 - psi(y)), psi(y) = sum_{m>=1} y^m/(m+1)
    phi: Vec<f64>,
    /// p[j] = phi_j tau^j / Phi(tau), j = 0..
    p: Vec<f64>,
}

fn schroder_mobile_tables() -> &'static SchroderMobileTables {
    use std::sync::OnceLock;
    static TABLES: OnceLock<SchroderMobileTables> = OnceLock::new();
    TABLES.get_or_init(|| {
        let jmax = 192usize;
        let psi = |m: usize| 1.0 / (m as f64 + 1.0);
        let mut phi = vec![0.0f64; jmax + 1];
        phi[0] = 1.0;
        for j in 1..=jmax {
            let mut acc = 0.0;
            for m in 1..=j {
                acc += psi(m) * phi[j - m];
            }
            phi[j] = acc;
        }
        // Phi(1/2) = 1/(2 - 2 ln 2); the tilted offspring law has mean 1.
        let phi_at_tau = 1.0 / (2.0 - 2.0 * std::f64::consts::LN_2);
        let mut p = vec![0.0f64; jmax + 1];
        let mut tp = 1.0f64;
        for j in 0..=jmax {
            p[j] = phi[j] * tp / phi_at_tau;
            tp *= 0.5;
        }
        let mean: f64 = p.iter().enumerate().map(|(j, q)| j as f64 * q).sum();
        debug_assert!((mean - 1.0).abs() < 1e-12);
        SchroderMobileTables { phi, p }
    })
}

fn ln_poisson_pmf(lambda: f64, k: u64) -> f64 {
    use statrs::function::gamma::ln_gamma;
    k as f64 * lambda.ln() - lambda - ln_gamma(k as f64 + 1.0)
}

/// Outdegree counts (count[j] = number of vertices with j children) of the
/// size-conditioned Galton-Watson tree with `n` vertices: independent
/// Poisson proposals for j >= 1 constrained to sum of j*N_j = n-1, the
/// leaf count forced, and a Poisson-weight acceptance on it. Exact, and the
/// constraint hits with probability Theta(1/sqrt(n)), so the expected cost
/// is O(sqrt(n) log n) before the final O(n) materialization.
fn conditioned_degree_counts<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<u64> {
    let tables = schroder_mobile_tables();
    let jmax = tables.p.len() - 1;
    let theta: Vec<f64> = (0..=jmax).map(|j| n as f64 * tables.p[j]).collect();
    let theta0 = theta[0];
    let mode0 = theta0.floor().max(0.0) as u64;
    let ln_pmf_max = ln_poisson_pmf(theta0, mode0);
    // Poisson samplers per j where the mean is non-negligible
    let active: Vec<(usize, f64)> = (1..=jmax)
        .map(|j| (j, theta[j]))
        .filter(|&(_, t)| t > 1e-14)
        .collect();
    loop {
        let mut counts = vec![0u64; jmax + 1];
        let mut s1 = 0u64;
        let mut s2 = 0u64;
        for &(j, t) in &active {
            let c: u64 = if t < 30.0 {
                // inversion for small means
                let mut u: f64 = rng.gen();
                let mut pmf = (-t).exp();
                let mut k = 0u64;
                while u > pmf && k < 10_000 {
                    u -= pmf;
                    k += 1;
                    pmf *= t / k as f64;
                }
                k
            } else {
                let d = rand_distr::Poisson::new(t).unwrap();
                rand_distr::Distribution::sample(&d, rng) as u64
            };
            if c > 0 {
                counts[j] = c;
                s1 += c;
                s2 += j as u64 * c;
                if s2 > (n - 1) as u64 {
                    break;
                }
            }
        }
        if s2 != (n - 1) as u64 {
            continue;
        }
        let n0 = n as u64 - s1;
        let lp = ln_poisson_pmf(theta0, n0);
        if rng.gen::<f64>() < (lp - ln_pmf_max).exp() {
            counts[0] = n0;
            return counts;
        }
    }
}

/// Uniform Schroder mobile with `leaves` leaves, via the Galton-Watson
/// representation: the plane tree with one vertex per mobile leaf is drawn
/// size-conditioned, then each vertex's children are regrouped into blocks
/// and unfolded along first-child spines into the mobile.
pub fn schroder_mobile_uniform<R: Rng + ?Sized>(leaves: usize, rng: &mut R) -> Result<Tree> {
    if leaves == 0 {
        return Err(Error::UnsupportedSize {
            class: "schroder-mobile".into(),
            n: 0,
            detail: "needs at least one leaf".into(),
        });
    }
    if leaves == 1 {
        return Ok(Tree::singleton());
    }
    let n = leaves;
    let counts = conditioned_degree_counts(n, rng);
    let mut deg: Vec<u32> = Vec::with_capacity(n);
    for (j, &c) in counts.iter().enumerate() {
        deg.extend(std::iter::repeat(j as u32).take(c as usize));
    }
    debug_assert_eq!(deg.len(), n);
    deg.shuffle(rng);
    let steps: Vec<i64> = deg.iter().map(|&d| d as i64 - 1).collect();
    let start = lukasiewicz_rotation(&steps);
    let seq: Vec<u32> = (0..n).map(|i| deg[(start + i) % n]).collect();

    // preorder parent structure of the GW tree
    let mut parent = vec![NO_NODE; n];
    {
        let mut stack: Vec<(u32, u32)> = Vec::new(); // (node, remaining)
        for (i, &d) in seq.iter().enumerate() {
            if let Some(top) = stack.last_mut() {
                parent[i] = top.0;
                top.1 -= 1;
            }
            while matches!(stack.last(), Some(&(_, 0))) {
                stack.pop();
            }
            if d > 0 {
                stack.push((i as u32, d));
            }
        }
    }
    // CSR children in preorder order
    let mut off = vec![0u32; n + 1];
    for i in 0..n {
        off[i + 1] = off[i] + seq[i];
    }
    let mut kids = vec![0u32; off[n] as usize];
    let mut fill = off.clone();
    for i in 1..n {
        let p = parent[i] as usize;
        kids[fill[p] as usize] = i as u32;
        fill[p] += 1;
    }

    let tables = schroder_mobile_tables();
    // post-order decode: mobile fragment root per GW vertex
    let mut frag = vec![NO_NODE; n];
    let mut tree = Tree::with_capacity(2 * n);
    // iterative post-order over preorder ids: process in reverse preorder,
    // children always have larger preorder index than the parent
    for v in (0..n).rev() {
        let j = seq[v] as usize;
        let mut leaf_chain = tree.new_node();
        if j > 0 {
            // sample block composition of the ordered children
            let mut pos = off[v] as usize;
            let mut rem = j;
            while rem > 0 {
                let m = sample_first_block(rem, &tables.phi, rng);
                let w = tree.new_node();
                let mut last = NO_NODE;
                tree.append_child(w, leaf_chain, &mut last);
                for _ in 0..m {
                    let c = kids[pos] as usize;
                    pos += 1;
                    tree.append_child(w, frag[c], &mut last);
                }
                leaf_chain = w;
                rem -= m;
            }
        }
        frag[v] = leaf_chain;
    }
    tree.set_root(frag[0]);
    Ok(tree)
}

/// Size of the first block among compositions of `j` weighted by
/// prod 1/(m_t + 1): P(m) = psi_m phi_{j-m} / phi_j.
fn sample_first_block<R: Rng + ?Sized>(j: usize, phi: &[f64], rng: &mut R) -> usize {
    debug_assert!(j >= 1);
    if j == 1 {
        return 1;
    }
    let mut u: f64 = rng.gen::<f64>() * phi[j];
    for m in 1..j {
        let w = phi[j - m] / (m as f64 + 1.0);
        if u < w {
            return m;
        }
        u -= w;
    }
    j
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MobileKind {
    Kary(usize),
    Schroder,
}

/// Exact-size sampler for the Galton-Watson core classes.
pub fn gw_core_uniform<R: Rng + ?Sized>(
    kind: MobileKind,
    leaves: usize,
    rng: &mut R,
) -> Result<Tree> {
    match kind {
        MobileKind::Kary(k) => kary_mobile_uniform(k, leaves, rng),
        MobileKind::Schroder => schroder_mobile_uniform(leaves, rng),
    }
}
