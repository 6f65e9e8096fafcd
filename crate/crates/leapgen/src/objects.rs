//! Walks and trees produced by the samplers, plus the statistics measured on
//! them. Trees live in a flat arena (first-child / next-sibling links) so a
//! composed object of 10^7 nodes is a single allocation, and all traversals
//! are iterative.

use crate::error::{Error, Result};

/// A step of a Motzkin-type walk: north-east, east, south-east.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum Step {
    Up,
    Flat,
    Down,
}

/// Walk over `{NE, E, SE}` staying weakly above the axis and ending on it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LatticeWalk {
    pub steps: Vec<Step>,
}

impl LatticeWalk {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Every prefix has #NE >= #SE and the totals agree.
    pub fn is_valid(&self) -> bool {
        let mut y: i64 = 0;
        for s in &self.steps {
            match s {
                Step::Up => y += 1,
                Step::Down => y -= 1,
                Step::Flat => {}
            }
            if y < 0 {
                return false;
            }
        }
        y == 0
    }

    /// Maximal height reached.
    pub fn height(&self) -> u64 {
        let mut y: i64 = 0;
        let mut max = 0i64;
        for s in &self.steps {
            match s {
                Step::Up => y += 1,
                Step::Down => y -= 1,
                Step::Flat => {}
            }
            max = max.max(y);
        }
        max as u64
    }

    /// Number of NE steps (= semilength of the embedded Dyck walk).
    pub fn up_count(&self) -> usize {
        self.steps.iter().filter(|s| **s == Step::Up).count()
    }

    /// The walk with horizontal steps removed.
    pub fn dyck_core(&self) -> LatticeWalk {
        LatticeWalk {
            steps: self
                .steps
                .iter()
                .copied()
                .filter(|s| *s != Step::Flat)
                .collect(),
        }
    }

    pub fn to_step_string(&self) -> String {
        self.steps
            .iter()
            .map(|s| match s {
                Step::Up => 'U',
                Step::Flat => 'E',
                Step::Down => 'D',
            })
            .collect()
    }

    pub fn from_step_string(s: &str) -> Result<LatticeWalk> {
        let steps = s
            .chars()
            .map(|c| match c {
                'U' => Ok(Step::Up),
                'E' => Ok(Step::Flat),
                'D' => Ok(Step::Down),
                other => Err(Error::Parse(format!("unknown walk step {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(LatticeWalk { steps })
    }
}

pub const NO_NODE: u32 = u32::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Node {
    pub first_child: u32,
    pub next_sibling: u32,
}

/// Rooted tree with ordered child lists. The stored order is an artifact of
/// generation; classes with unordered or cyclic children get their semantics
/// from the canonicalization helpers.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Tree {
    nodes: Vec<Node>,
    root: u32,
}

impl Tree {
    pub fn new() -> Self {
        Tree {
            nodes: Vec::new(),
            root: NO_NODE,
        }
    }

    pub fn with_capacity(cap: usize) -> Self {
        Tree {
            nodes: Vec::with_capacity(cap),
            root: NO_NODE,
        }
    }

    /// A single-vertex tree.
    pub fn singleton() -> Self {
        let mut t = Tree::new();
        let r = t.new_node();
        t.set_root(r);
        t
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn root(&self) -> u32 {
        self.root
    }

    pub fn set_root(&mut self, v: u32) {
        self.root = v;
    }

    pub fn clear(&mut self) {
        self.nodes.clear();
        self.root = NO_NODE;
    }

    /// Drop nodes at index `len` and beyond. Valid only when no retained node
    /// links into the dropped range, which holds for the generation
    /// discipline used here (rolled-back draws are always a contiguous tail).
    pub fn truncate(&mut self, len: usize) {
        self.nodes.truncate(len);
    }

    pub fn new_node(&mut self) -> u32 {
        let id = self.nodes.len() as u32;
        self.nodes.push(Node {
            first_child: NO_NODE,
            next_sibling: NO_NODE,
        });
        id
    }

    /// Prepend `child` to `parent`'s child list.
    pub fn attach_child(&mut self, parent: u32, child: u32) {
        let head = self.nodes[parent as usize].first_child;
        self.nodes[child as usize].next_sibling = head;
        self.nodes[parent as usize].first_child = child;
    }

    /// Append `child` after `*last` (or as the first child when `*last` is
    /// `NO_NODE`), keeping insertion order.
    pub fn append_child(&mut self, parent: u32, child: u32, last: &mut u32) {
        if *last == NO_NODE {
            self.nodes[parent as usize].first_child = child;
        } else {
            self.nodes[*last as usize].next_sibling = child;
        }
        *last = child;
    }

    pub fn set_first_child(&mut self, v: u32, c: u32) {
        self.nodes[v as usize].first_child = c;
    }

    pub fn set_next_sibling(&mut self, v: u32, s: u32) {
        self.nodes[v as usize].next_sibling = s;
    }

    pub fn children(&self, v: u32) -> ChildIter<'_> {
        ChildIter {
            tree: self,
            cur: self.nodes[v as usize].first_child,
        }
    }

    pub fn child_count(&self, v: u32) -> usize {
        self.children(v).count()
    }

    pub fn is_leaf(&self, v: u32) -> bool {
        self.nodes[v as usize].first_child == NO_NODE
    }

    /// Copy the node range `[start, end)` (a complete subtree rooted at
    /// `start` whose links stay inside the range) to the end of the arena;
    /// returns the id of the copied root.
    pub fn copy_subtree_range(&mut self, start: u32, end: u32) -> u32 {
        let delta = self.nodes.len() as u32 - start;
        for i in start..end {
            let n = self.nodes[i as usize];
            let fix = |x: u32| if x == NO_NODE { NO_NODE } else { x + delta };
            self.nodes.push(Node {
                first_child: fix(n.first_child),
                next_sibling: fix(n.next_sibling),
            });
        }
        start + delta
    }

    /// Number of nodes reachable from `v`.
    pub fn subtree_size(&self, v: u32) -> usize {
        let mut stack = vec![v];
        let mut count = 0usize;
        while let Some(u) = stack.pop() {
            count += 1;
            let mut c = self.nodes[u as usize].first_child;
            while c != NO_NODE {
                stack.push(c);
                c = self.nodes[c as usize].next_sibling;
            }
        }
        count
    }

    /// Maximal root-to-node depth, root at depth 0.
    pub fn height(&self) -> u64 {
        let mut max = 0u64;
        let mut stack = vec![(self.root, 0u64)];
        while let Some((v, d)) = stack.pop() {
            max = max.max(d);
            let mut c = self.nodes[v as usize].first_child;
            while c != NO_NODE {
                stack.push((c, d + 1));
                c = self.nodes[c as usize].next_sibling;
            }
        }
        max
    }

    pub fn leaf_count(&self) -> u64 {
        let mut count = 0u64;
        let mut stack = vec![self.root];
        while let Some(v) = stack.pop() {
            let mut c = self.nodes[v as usize].first_child;
            if c == NO_NODE {
                count += 1;
            }
            while c != NO_NODE {
                stack.push(c);
                c = self.nodes[c as usize].next_sibling;
            }
        }
        count
    }

    /// Internal nodes whose children are exactly two leaves.
    pub fn cherry_count(&self) -> u64 {
        let mut count = 0u64;
        let mut stack = vec![self.root];
        while let Some(v) = stack.pop() {
            let mut kids = 0usize;
            let mut all_leaves = true;
            let mut c = self.nodes[v as usize].first_child;
            while c != NO_NODE {
                kids += 1;
                if !self.is_leaf(c) {
                    all_leaves = false;
                    stack.push(c);
                }
                c = self.nodes[c as usize].next_sibling;
            }
            if kids == 2 && all_leaves {
                count += 1;
            }
        }
        count
    }

    /// Sum of depths over all nodes; divide by the node count for the
    /// average path length.
    pub fn depth_sum(&self) -> u64 {
        let mut sum = 0u64;
        let mut stack = vec![(self.root, 0u64)];
        while let Some((v, d)) = stack.pop() {
            sum += d;
            let mut c = self.nodes[v as usize].first_child;
            while c != NO_NODE {
                stack.push((c, d + 1));
                c = self.nodes[c as usize].next_sibling;
            }
        }
        sum
    }

    pub fn average_path_length(&self) -> f64 {
        self.depth_sum() as f64 / self.len() as f64
    }

    /// Nested-parenthesis serialization in storage order.
    pub fn to_parens(&self) -> String {
        let mut out = String::with_capacity(2 * self.len());
        // iterative pre-order with explicit close markers
        enum Item {
            Open(u32),
            Close,
        }
        let mut stack = vec![Item::Open(self.root)];
        while let Some(item) = stack.pop() {
            match item {
                Item::Open(v) => {
                    out.push('(');
                    stack.push(Item::Close);
                    let kids: Vec<u32> = self.children(v).collect();
                    for &c in kids.iter().rev() {
                        stack.push(Item::Open(c));
                    }
                }
                Item::Close => out.push(')'),
            }
        }
        out
    }

    /// Canonical form with unordered children (children sorted recursively).
    pub fn canonical_unordered(&self) -> String {
        fn go(t: &Tree, v: u32) -> String {
            let mut kids: Vec<String> = t.children(v).map(|c| go(t, c)).collect();
            kids.sort();
            format!("({})", kids.concat())
        }
        go(self, self.root)
    }

    /// Canonical form with cyclically ordered children (lexicographically
    /// minimal rotation of the child list at every node).
    pub fn canonical_cyclic(&self) -> String {
        fn go(t: &Tree, v: u32) -> String {
            let kids: Vec<String> = t.children(v).map(|c| go(t, c)).collect();
            if kids.is_empty() {
                return "()".to_string();
            }
            let mut best: Option<Vec<&String>> = None;
            let m = kids.len();
            for r in 0..m {
                let rot: Vec<&String> = (0..m).map(|i| &kids[(r + i) % m]).collect();
                if best.as_ref().map_or(true, |b| rot < *b) {
                    best = Some(rot);
                }
            }
            let inner: String = best.unwrap().iter().map(|s| s.as_str()).collect();
            format!("({inner})")
        }
        go(self, self.root)
    }
}

pub struct ChildIter<'a> {
    tree: &'a Tree,
    cur: u32,
}

impl Iterator for ChildIter<'_> {
    type Item = u32;

    fn next(&mut self) -> Option<u32> {
        if self.cur == NO_NODE {
            None
        } else {
            let v = self.cur;
            self.cur = self.tree.nodes[v as usize].next_sibling;
            Some(v)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn caterpillar(n: usize) -> Tree {
        let mut t = Tree::new();
        let root = t.new_node();
        t.set_root(root);
        let mut cur = root;
        for _ in 1..n {
            let c = t.new_node();
            t.attach_child(cur, c);
            cur = c;
        }
        t
    }

    #[test]
    fn walk_basics() {
        let w = LatticeWalk::from_step_string("EUEDUUDD").unwrap();
        assert!(w.is_valid());
        assert_eq!(w.height(), 2);
        assert_eq!(w.up_count(), 3);
        assert_eq!(w.dyck_core().to_step_string(), "UDUUDD");
        assert_eq!(w.dyck_core().height(), w.height());
        let bad = LatticeWalk::from_step_string("DU").unwrap();
        assert!(!bad.is_valid());
    }

    #[test]
    fn tree_statistics() {
        let t = caterpillar(4);
        assert_eq!(t.height(), 3);
        assert_eq!(t.leaf_count(), 1);
        assert_eq!(t.depth_sum(), 6);
        assert_eq!(t.to_parens(), "(((())))");

        // root with two leaf children: one cherry
        let mut s = Tree::new();
        let r = s.new_node();
        s.set_root(r);
        let a = s.new_node();
        let b = s.new_node();
        s.attach_child(r, a);
        s.attach_child(r, b);
        assert_eq!(s.cherry_count(), 1);
        assert_eq!(s.leaf_count(), 2);
        assert_eq!(s.average_path_length(), 2.0 / 3.0);
    }

    #[test]
    fn canonical_forms() {
        // same unordered tree built with different child orders
        let build = |swap: bool| {
            let mut t = Tree::new();
            let r = t.new_node();
            t.set_root(r);
            let a = t.new_node(); // leaf
            let b = t.new_node(); // internal with one leaf
            let c = t.new_node();
            t.attach_child(b, c);
            if swap {
                t.attach_child(r, a);
                t.attach_child(r, b);
            } else {
                t.attach_child(r, b);
                t.attach_child(r, a);
            }
            t
        };
        assert_eq!(
            build(true).canonical_unordered(),
            build(false).canonical_unordered()
        );

        // cyclic: rotations agree, general reorderings need not
        let cyc = |perm: [usize; 3]| {
            let mut t = Tree::new();
            let r = t.new_node();
            t.set_root(r);
            // children: leaf, cherry, chain-2 in some order
            let mut ids = Vec::new();
            let leaf = t.new_node();
            ids.push(leaf);
            let cherry = t.new_node();
            let c1 = t.new_node();
            let c2 = t.new_node();
            t.attach_child(cherry, c1);
            t.attach_child(cherry, c2);
            ids.push(cherry);
            let chain = t.new_node();
            let d1 = t.new_node();
            let d2 = t.new_node();
            t.attach_child(d1, d2);
            t.attach_child(chain, d1);
            ids.push(chain);
            // attach_child prepends, so push in reverse of desired order
            for &i in perm.iter().rev() {
                t.attach_child(r, ids[i]);
            }
            t
        };
        let a = cyc([0, 1, 2]).canonical_cyclic();
        let b = cyc([1, 2, 0]).canonical_cyclic();
        let c = cyc([2, 0, 1]).canonical_cyclic();
        assert_eq!(a, b);
        assert_eq!(b, c);
    }

    #[test]
    fn subtree_copy_is_isomorphic() {
        let mut t = caterpillar(3);
        let start = 0u32;
        let end = t.len() as u32;
        let copy_root = t.copy_subtree_range(start, end);
        assert_eq!(t.subtree_size(copy_root), 3);
        assert_eq!(t.len(), 6);
    }
}
