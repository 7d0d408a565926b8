//! Composition trees: a brute-force model of the recurrence.
//!
//! A composition tree assigns a term to every vertex; a vertex carrying term
//! `i` has exactly `arity_i` ordered branches, each empty or another tree.
//! Its value is the product of the vertex weights. `s_n` is at most the sum
//! of the values of all trees with `n` vertices, with equality when every
//! term is a sum, and at least their maximum.
//!
//! The number of trees explodes quickly (the mixed five-term example already
//! has about 10^10 trees on eight vertices), so the aggregate oracles use the
//! root decomposition: a tree is a root term plus an ordered tuple of
//! branches whose sizes compose `n - 1`, and both the sum and the maximum of
//! values factor over that tuple. [`TreeEnumerator`] streams the trees
//! themselves for the sizes where that is feasible.

use std::collections::HashSet;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::recurrence::{Operator, RecurrenceSpec};

/// Default largest vertex count the oracle accepts.
pub const DEFAULT_VERTEX_CAP: usize = 9;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("n = {n} exceeds the oracle cap of {cap} vertices")]
    AboveCap { n: usize, cap: usize },
    #[error("trees need at least {min} vertices, got {n}")]
    TooSmall { n: usize, min: usize },
}

/// Ordered compositions of `total` into `parts` nonnegative parts, in
/// lexicographic order.
#[derive(Debug, Clone)]
pub struct Compositions {
    current: Vec<usize>,
    started: bool,
    done: bool,
}

impl Compositions {
    pub fn new(total: usize, parts: usize) -> Self {
        assert!(parts >= 1, "compositions need at least one part");
        let mut current = vec![0; parts];
        current[parts - 1] = total;
        Compositions {
            current,
            started: false,
            done: false,
        }
    }
}

impl Iterator for Compositions {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        if !self.started {
            self.started = true;
            return Some(self.current.clone());
        }
        let len = self.current.len();
        // Rightmost position (before the last) with something after it.
        let mut suffix = self.current[len - 1];
        let mut pivot = None;
        for i in (0..len - 1).rev() {
            if suffix > 0 {
                pivot = Some(i);
                break;
            }
            suffix += self.current[i];
        }
        let Some(i) = pivot else {
            self.done = true;
            return None;
        };
        let rest: usize = self.current[i + 1..].iter().sum();
        self.current[i] += 1;
        for v in &mut self.current[i + 1..] {
            *v = 0;
        }
        self.current[len - 1] = rest - 1;
        Some(self.current.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CompositionTree {
    term: usize,
    branches: Vec<Option<CompositionTree>>,
}

impl CompositionTree {
    /// A tree with root term `term`; `branches.len()` must equal its arity.
    pub fn new(term: usize, branches: Vec<Option<CompositionTree>>) -> Self {
        CompositionTree { term, branches }
    }

    pub fn term(&self) -> usize {
        self.term
    }

    pub fn branches(&self) -> &[Option<CompositionTree>] {
        &self.branches
    }

    pub fn size(&self) -> usize {
        1 + self.children().map(CompositionTree::size).sum::<usize>()
    }

    fn children(&self) -> impl Iterator<Item = &CompositionTree> {
        self.branches.iter().flatten()
    }

    /// Product of the weights of all vertices.
    pub fn value(&self, spec: &RecurrenceSpec) -> BigRational {
        self.children()
            .fold(spec.terms()[self.term].weight.clone(), |acc, c| {
                acc * c.value(spec)
            })
    }

    /// True when every vertex has as many branches as its term's arity.
    pub fn is_well_formed(&self, spec: &RecurrenceSpec) -> bool {
        spec.terms()
            .get(self.term)
            .is_some_and(|t| t.arity == self.branches.len())
            && self.children().all(|c| c.is_well_formed(spec))
    }

    /// Sizes of the subtrees rooted at each vertex, root first (preorder).
    pub fn subtree_sizes(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.collect_sizes(&mut out);
        out
    }

    fn collect_sizes(&self, out: &mut Vec<usize>) -> usize {
        let slot = out.len();
        out.push(0);
        let size = 1 + self.children().map(|c| c.collect_sizes(out)).sum::<usize>();
        out[slot] = size;
        size
    }
}

/// Streams every composition tree with a fixed vertex count, ordered by root
/// term index, then branch-size composition (lexicographic), then branches
/// left to right.
pub struct TreeEnumerator<'a> {
    arities: &'a [usize],
    size: usize,
    term: usize,
    frame: Option<Frame<'a>>,
    finished: bool,
}

struct Frame<'a> {
    compositions: Compositions,
    parts: Vec<usize>,
    children: Vec<Option<TreeEnumerator<'a>>>,
    current: Vec<Option<CompositionTree>>,
}

impl<'a> Frame<'a> {
    fn start(arities: &'a [usize], arity: usize, size: usize) -> Self {
        let mut compositions = Compositions::new(size - 1, arity);
        let parts = compositions.next().expect("at least one composition");
        let mut frame = Frame {
            compositions,
            parts: Vec::new(),
            children: Vec::new(),
            current: Vec::new(),
        };
        frame.load(arities, parts);
        frame
    }

    fn load(&mut self, arities: &'a [usize], parts: Vec<usize>) {
        self.children.clear();
        self.current.clear();
        for &part in &parts {
            if part == 0 {
                self.children.push(None);
                self.current.push(None);
            } else {
                let mut child = TreeEnumerator::raw(arities, part);
                self.current.push(child.next());
                self.children.push(Some(child));
            }
        }
        self.parts = parts;
    }

    fn advance(&mut self, arities: &'a [usize]) -> bool {
        for k in (0..self.parts.len()).rev() {
            let Some(child) = self.children[k].as_mut() else {
                continue;
            };
            if let Some(tree) = child.next() {
                self.current[k] = Some(tree);
                for j in k + 1..self.parts.len() {
                    if self.parts[j] > 0 {
                        let mut fresh = TreeEnumerator::raw(arities, self.parts[j]);
                        self.current[j] = fresh.next();
                        self.children[j] = Some(fresh);
                    }
                }
                return true;
            }
        }
        match self.compositions.next() {
            Some(parts) => {
                self.load(arities, parts);
                true
            }
            None => false,
        }
    }
}

impl<'a> TreeEnumerator<'a> {
    fn raw(arities: &'a [usize], size: usize) -> Self {
        TreeEnumerator {
            arities,
            size,
            term: 0,
            frame: None,
            finished: size == 0,
        }
    }
}

impl Iterator for TreeEnumerator<'_> {
    type Item = CompositionTree;

    fn next(&mut self) -> Option<CompositionTree> {
        loop {
            if self.finished {
                return None;
            }
            match self.frame.as_mut() {
                None => {
                    if self.term >= self.arities.len() {
                        self.finished = true;
                        return None;
                    }
                    self.frame = Some(Frame::start(
                        self.arities,
                        self.arities[self.term],
                        self.size,
                    ));
                }
                Some(frame) => {
                    if !frame.advance(self.arities) {
                        self.frame = None;
                        self.term += 1;
                        continue;
                    }
                }
            }
            let frame = self.frame.as_ref().expect("frame just set");
            return Some(CompositionTree::new(self.term, frame.current.clone()));
        }
    }
}

/// Tree-based checks for one recurrence, with memoised aggregates.
#[derive(Debug, Clone)]
pub struct TreeOracle {
    spec: RecurrenceSpec,
    arities: Vec<usize>,
    cap: usize,
}

impl TreeOracle {
    pub fn new(spec: &RecurrenceSpec) -> Self {
        TreeOracle {
            spec: spec.clone(),
            arities: spec.terms().iter().map(|t| t.arity).collect(),
            cap: DEFAULT_VERTEX_CAP,
        }
    }

    /// Raises (or lowers) the vertex cap.
    pub fn with_cap(mut self, cap: usize) -> Self {
        self.cap = cap;
        self
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn spec(&self) -> &RecurrenceSpec {
        &self.spec
    }

    fn check(&self, n: usize, min: usize) -> Result<(), OracleError> {
        if n > self.cap {
            Err(OracleError::AboveCap { n, cap: self.cap })
        } else if n < min {
            Err(OracleError::TooSmall { n, min })
        } else {
            Ok(())
        }
    }

    /// Every composition tree with `n` vertices, once each.
    pub fn enumerate(&self, n: usize) -> Result<TreeEnumerator<'_>, OracleError> {
        self.check(n, 1)?;
        Ok(TreeEnumerator::raw(&self.arities, n))
    }

    /// Sum of the values of all trees with `n` vertices.
    pub fn oracle_sum(&self, n: usize) -> Result<BigRational, OracleError> {
        self.check(n, 0)?;
        Ok(self.decompose(n, Combine::Sum, |_| Combine::Sum))
    }

    /// Largest value among trees with `n` vertices.
    pub fn oracle_max(&self, n: usize) -> Result<BigRational, OracleError> {
        self.check(n, 0)?;
        Ok(self.decompose(n, Combine::Max, |_| Combine::Max))
    }

    /// Number of trees with `n` vertices.
    pub fn count(&self, n: usize) -> Result<BigInt, OracleError> {
        self.check(n, 0)?;
        let mut memo = vec![BigInt::one()];
        for size in 1..=n {
            let mut total = BigInt::zero();
            for &arity in &self.arities {
                for parts in Compositions::new(size - 1, arity) {
                    total += parts.iter().map(|&p| &memo[p]).product::<BigInt>();
                }
            }
            memo.push(total);
        }
        Ok(memo.swap_remove(n))
    }

    /// `s_n` evaluated straight from the definition: every term's sum or max
    /// runs over explicitly listed compositions, with no merging and no
    /// convolution tables.
    pub fn direct_value(&self, n: usize) -> Result<BigRational, OracleError> {
        self.check(n, 0)?;
        Ok(self.decompose(n, Combine::Sum, |term| match term {
            Operator::Sum => Combine::Sum,
            Operator::Max => Combine::Max,
        }))
    }

    /// `across_terms` combines the contributions of different root terms,
    /// `within_term(op)` combines compositions under one root term.
    fn decompose(
        &self,
        n: usize,
        across_terms: Combine,
        within_term: impl Fn(Operator) -> Combine,
    ) -> BigRational {
        let mut memo = vec![BigRational::one()];
        for size in 1..=n {
            let mut outer: Option<BigRational> = None;
            for term in self.spec.terms() {
                let mut inner: Option<BigRational> = None;
                for parts in Compositions::new(size - 1, term.arity) {
                    let product = parts
                        .iter()
                        .fold(term.weight.clone(), |acc, &p| acc * &memo[p]);
                    inner = Some(within_term(term.op).apply(inner, product));
                }
                let inner = inner.expect("every arity has a composition");
                outer = Some(across_terms.apply(outer, inner));
            }
            memo.push(outer.expect("at least one term"));
        }
        memo.swap_remove(n)
    }

    /// Sum of values by walking the tree stream.
    pub fn enumerated_sum(&self, n: usize) -> Result<BigRational, OracleError> {
        Ok(self
            .enumerate(n)?
            .fold(BigRational::zero(), |acc, t| acc + t.value(&self.spec)))
    }

    /// Max of values by walking the tree stream.
    pub fn enumerated_max(&self, n: usize) -> Result<BigRational, OracleError> {
        Ok(self
            .enumerate(n)?
            .map(|t| t.value(&self.spec))
            .max()
            .unwrap_or_else(BigRational::zero))
    }

    /// Whether every tree with `n >= 2` vertices has a proper subtree whose
    /// size lies in `[(n-1)/(L+1), (L n + 1)/(L+1)]`. Returns `true` without
    /// checking anything for `n = 1`, where no proper subtree exists.
    ///
    /// Only subtree sizes matter, and those are unchanged by dropping empty
    /// branches, reordering branches and relabelling vertices. Each tree
    /// therefore reduces to an unordered rooted tree with out-degree at most
    /// `L`, and every such shape is realised by giving all vertices a term
    /// of arity `L`. Checking those shapes covers every composition tree.
    pub fn check_subtree_lemma(&self, n: usize) -> Result<bool, OracleError> {
        self.check(n, 1)?;
        if n == 1 {
            return Ok(true);
        }
        let l = self.spec.max_arity();
        Ok(self.find_lemma_violation(n, lemma_interval(n, l)).is_none())
    }

    /// Same verdict as [`check_subtree_lemma`](Self::check_subtree_lemma),
    /// but walking the full tree stream.
    pub fn check_subtree_lemma_enumerated(&self, n: usize) -> Result<bool, OracleError> {
        self.check(n, 1)?;
        if n == 1 {
            return Ok(true);
        }
        let range = lemma_interval(n, self.spec.max_arity());
        Ok(self
            .enumerate(n)?
            .all(|t| t.subtree_sizes()[1..].iter().any(|s| range.contains(s))))
    }

    /// Subtree-size lists (root excluded) of a shape with `n` vertices that
    /// has no proper subtree size inside `range`, if any.
    pub fn find_lemma_violation(
        &self,
        n: usize,
        range: std::ops::RangeInclusive<usize>,
    ) -> Option<Vec<usize>> {
        shape_size_profiles(n, self.spec.max_arity())
            .into_iter()
            .find(|sizes| !sizes[1..].iter().any(|s| range.contains(s)))
            .map(|sizes| sizes[1..].to_vec())
    }
}

#[derive(Clone, Copy)]
enum Combine {
    Sum,
    Max,
}

impl Combine {
    fn apply(self, acc: Option<BigRational>, value: BigRational) -> BigRational {
        match (self, acc) {
            (_, None) => value,
            (Combine::Sum, Some(a)) => a + value,
            (Combine::Max, Some(a)) => a.max(value),
        }
    }
}

/// Integer sizes in `[(n-1)/(L+1), (L n + 1)/(L+1)]`.
pub fn lemma_interval(n: usize, max_arity: usize) -> std::ops::RangeInclusive<usize> {
    let d = max_arity + 1;
    let lo = (n - 1).div_ceil(d);
    let hi = (max_arity * n + 1) / d;
    lo..=hi
}

/// Distinct multisets of subtree sizes over unordered rooted trees with `n`
/// vertices and at most `max_degree` children per vertex; each list is
/// sorted descending, so the root's size comes first.
fn shape_size_profiles(n: usize, max_degree: usize) -> Vec<Vec<usize>> {
    // profiles[k] = distinct sorted size lists for shapes with k vertices.
    let mut profiles: Vec<Vec<Vec<usize>>> = vec![Vec::new(), vec![vec![1]]];
    for size in 2..=n {
        let mut found: HashSet<Vec<usize>> = HashSet::new();
        let mut chosen: Vec<(usize, usize)> = Vec::new();
        extend_children(
            &profiles,
            size - 1,
            max_degree,
            (usize::MAX, 0),
            &mut chosen,
            &mut |kids| {
                let mut sizes = vec![size];
                for &(k, idx) in kids {
                    sizes.extend_from_slice(&profiles[k][idx]);
                }
                sizes.sort_unstable_by(|a, b| b.cmp(a));
                found.insert(sizes);
            },
        );
        let mut list: Vec<Vec<usize>> = found.into_iter().collect();
        list.sort();
        profiles.push(list);
    }
    profiles.swap_remove(n)
}

/// A child of an unordered shape: its size and the index of its profile.
type Child = (usize, usize);

// Chooses children as a nonincreasing sequence of (size, profile index)
// pairs so each multiset is produced once.
fn extend_children(
    profiles: &[Vec<Vec<usize>>],
    remaining: usize,
    slots: usize,
    bound: Child,
    chosen: &mut Vec<Child>,
    emit: &mut dyn FnMut(&[Child]),
) {
    if remaining == 0 {
        emit(chosen);
        return;
    }
    if slots == 0 {
        return;
    }
    for size in (1..=remaining.min(bound.0)).rev() {
        let count = profiles[size].len();
        let top = if size == bound.0 {
            bound.1.min(count.saturating_sub(1))
        } else {
            count - 1
        };
        for idx in (0..=top).rev() {
            chosen.push((size, idx));
            extend_children(
                profiles,
                remaining - size,
                slots - 1,
                (size, idx),
                chosen,
                emit,
            );
            chosen.pop();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recurrence::{catalog, parse_spec};

    fn int(v: i64) -> BigRational {
        BigRational::from_integer(v.into())
    }

    #[test]
    fn compositions_in_lex_order() {
        let all: Vec<Vec<usize>> = Compositions::new(2, 2).collect();
        assert_eq!(all, vec![vec![0, 2], vec![1, 1], vec![2, 0]]);
        assert_eq!(
            Compositions::new(0, 3).collect::<Vec<_>>(),
            vec![vec![0, 0, 0]]
        );
        assert_eq!(Compositions::new(4, 1).collect::<Vec<_>>(), vec![vec![4]]);
        // C(7 + 4, 4)
        assert_eq!(Compositions::new(7, 5).count(), 330);
        let seen: HashSet<Vec<usize>> = Compositions::new(5, 3).collect();
        assert_eq!(seen.len(), 21);
    }

    #[test]
    fn single_vertex_trees() {
        let spec = catalog::mixed_example();
        let oracle = TreeOracle::new(&spec);
        let trees: Vec<_> = oracle.enumerate(1).unwrap().collect();
        assert_eq!(trees.len(), spec.len());
        let values: Vec<_> = trees.iter().map(|t| t.value(&spec)).collect();
        assert_eq!(values, [2, 3, 4, 5, 6].map(int));
        assert_eq!(oracle.oracle_sum(1).unwrap(), spec.first_value());
    }

    #[test]
    fn catalan_tree_counts() {
        let oracle = TreeOracle::new(&catalog::catalan());
        let counts: Vec<usize> = (1..=7)
            .map(|n| oracle.enumerate(n).unwrap().count())
            .collect();
        assert_eq!(counts, vec![1, 2, 5, 14, 42, 132, 429]);
        assert_eq!(oracle.oracle_sum(4).unwrap(), int(14));
        assert_eq!(oracle.count(7).unwrap(), BigInt::from(429));
    }

    #[test]
    fn doubling_max_small_trees() {
        let spec = catalog::doubling_max();
        let oracle = TreeOracle::new(&spec);
        let trees: Vec<_> = oracle.enumerate(2).unwrap().collect();
        assert_eq!(trees.len(), 2);
        assert!(trees.iter().all(|t| t.value(&spec) == int(4)));
        assert_eq!(trees[0].branches()[0], None);
        assert_eq!(oracle.oracle_max(3).unwrap(), int(8));
        assert_eq!(oracle.enumerated_max(3).unwrap(), int(8));
    }

    #[test]
    fn enumeration_is_exhaustive_and_unique() {
        let spec = parse_spec("sum 1 2\nmax 3 1/2\nsum 2 3").unwrap();
        let oracle = TreeOracle::new(&spec);
        for n in 1..=6 {
            let trees: Vec<_> = oracle.enumerate(n).unwrap().collect();
            let unique: HashSet<_> = trees.iter().cloned().collect();
            assert_eq!(unique.len(), trees.len());
            assert_eq!(BigInt::from(trees.len()), oracle.count(n).unwrap());
            assert!(trees
                .iter()
                .all(|t| t.size() == n && t.is_well_formed(&spec)));
            assert_eq!(
                oracle.enumerated_sum(n).unwrap(),
                oracle.oracle_sum(n).unwrap()
            );
            assert_eq!(
                oracle.enumerated_max(n).unwrap(),
                oracle.oracle_max(n).unwrap()
            );
        }
    }

    #[test]
    fn enumeration_order_is_by_root_term_first() {
        let spec = parse_spec("sum 2 1\nsum 1 1").unwrap();
        let oracle = TreeOracle::new(&spec);
        let roots: Vec<usize> = oracle.enumerate(3).unwrap().map(|t| t.term()).collect();
        assert!(roots.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn subtree_sizes_preorder() {
        let leaf = CompositionTree::new(0, vec![None, None]);
        let mid = CompositionTree::new(0, vec![Some(leaf.clone()), None]);
        let root = CompositionTree::new(0, vec![Some(mid), Some(leaf)]);
        assert_eq!(root.subtree_sizes(), vec![4, 2, 1, 1]);
        assert_eq!(root.size(), 4);
    }

    #[test]
    fn lemma_interval_bounds() {
        // n = 8, L = 2: [7/3, 17/3] -> 3..=5
        assert_eq!(lemma_interval(8, 2), 3..=5);
        // n = 2, L = 6: [1/7, 13/7] -> 1..=1
        assert_eq!(lemma_interval(2, 6), 1..=1);
    }

    #[test]
    fn shape_profiles_count_unordered_trees() {
        // Unordered rooted trees: 1, 1, 2, 4, 9, 20, 48, 115. Distinct size
        // profiles can be fewer, binary-bounded ones fewer still.
        let profiles = shape_size_profiles(5, 5);
        assert!(profiles.len() <= 9);
        assert!(profiles.contains(&vec![5, 4, 3, 2, 1]));
        assert!(profiles.contains(&vec![5, 1, 1, 1, 1]));
        assert!(!shape_size_profiles(5, 2).contains(&vec![5, 1, 1, 1, 1]));
    }

    #[test]
    fn subtree_lemma_holds_and_violations_are_detectable() {
        let oracle = TreeOracle::new(&catalog::catalan());
        for n in 2..=8 {
            assert!(oracle.check_subtree_lemma(n).unwrap());
            assert!(oracle.check_subtree_lemma_enumerated(n).unwrap());
        }
        assert!(oracle.check_subtree_lemma(1).unwrap());
        // Proper subtrees of an 8-vertex tree have at most 7 vertices, and
        // every tree has a leaf.
        assert!(oracle.find_lemma_violation(8, 8..=9).is_some());
        assert!(oracle.find_lemma_violation(8, 1..=7).is_none());
    }

    #[test]
    fn shape_check_agrees_with_stream_on_narrow_windows() {
        let spec = parse_spec("sum 1 1\nsum 3 1").unwrap();
        let oracle = TreeOracle::new(&spec);
        for n in 2..=6 {
            for lo in 1..n {
                for hi in lo..n {
                    let by_shape = oracle.find_lemma_violation(n, lo..=hi).is_none();
                    let by_stream = oracle
                        .enumerate(n)
                        .unwrap()
                        .all(|t| t.subtree_sizes()[1..].iter().any(|s| (lo..=hi).contains(s)));
                    assert_eq!(by_shape, by_stream, "n={n} window {lo}..={hi}");
                }
            }
        }
    }

    #[test]
    fn cap_is_enforced() {
        let oracle = TreeOracle::new(&catalog::catalan());
        assert_eq!(
            oracle.oracle_sum(10).unwrap_err(),
            OracleError::AboveCap { n: 10, cap: 9 }
        );
        assert!(oracle.clone().with_cap(12).oracle_sum(12).is_ok());
        assert!(matches!(
            oracle.enumerate(0),
            Err(OracleError::TooSmall { .. })
        ));
    }

    #[test]
    fn direct_value_mixed_example() {
        let oracle = TreeOracle::new(&catalog::mixed_example());
        assert_eq!(oracle.direct_value(2).unwrap(), int(800));
        assert!(oracle.oracle_max(2).unwrap() <= int(800));
        assert!(oracle.oracle_sum(2).unwrap() >= int(800));
    }
}
