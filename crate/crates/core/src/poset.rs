//! Finite directed posets.
//!
//! The index fabric of every coherent net in this crate. Elements carry a
//! fixed iteration order (input order) so downstream matrix layouts are
//! deterministic. The input relation may be any generating set: the
//! reflexive-transitive closure is computed at validation time.
//! Finiteness plus directedness force a unique maximum element, which hosts
//! the ambient space of every net indexed by the poset.

use std::collections::HashMap;
use std::sync::Arc;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PosetError {
    #[error("poset must be nonempty")]
    Empty,
    #[error("duplicate element label `{0}`")]
    DuplicateLabel(String),
    #[error("unknown element `{0}`")]
    UnknownElement(String),
    #[error("not antisymmetric: `{0}` <= `{1}` and `{1}` <= `{0}`")]
    NotAntisymmetric(String, String),
    #[error("not directed: `{0}` and `{1}` have no upper bound")]
    NotDirected(String, String),
}

/// A finite directed partially ordered set with a fixed element order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectedPoset {
    labels: Vec<String>,
    index: HashMap<String, usize>,
    /// row-major n*n closure: leq[a*n+b] means a <= b
    leq: Vec<bool>,
    maximum: usize,
}

impl DirectedPoset {
    /// Validates `leq_pairs` (a generating set of label pairs), computes the
    /// reflexive-transitive closure and checks antisymmetry and directedness.
    pub fn new<S: AsRef<str>>(
        elements: &[S],
        leq_pairs: &[(S, S)],
    ) -> Result<DirectedPoset, PosetError> {
        if elements.is_empty() {
            return Err(PosetError::Empty);
        }
        let labels: Vec<String> = elements.iter().map(|s| s.as_ref().to_string()).collect();
        let mut index = HashMap::new();
        for (i, l) in labels.iter().enumerate() {
            if index.insert(l.clone(), i).is_some() {
                return Err(PosetError::DuplicateLabel(l.clone()));
            }
        }
        let n = labels.len();
        let mut leq = vec![false; n * n];
        for i in 0..n {
            leq[i * n + i] = true;
        }
        for (a, b) in leq_pairs {
            let ia = *index
                .get(a.as_ref())
                .ok_or_else(|| PosetError::UnknownElement(a.as_ref().to_string()))?;
            let ib = *index
                .get(b.as_ref())
                .ok_or_else(|| PosetError::UnknownElement(b.as_ref().to_string()))?;
            leq[ia * n + ib] = true;
        }
        // Warshall closure
        for k in 0..n {
            for i in 0..n {
                if leq[i * n + k] {
                    for j in 0..n {
                        if leq[k * n + j] {
                            leq[i * n + j] = true;
                        }
                    }
                }
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if leq[i * n + j] && leq[j * n + i] {
                    return Err(PosetError::NotAntisymmetric(
                        labels[i].clone(),
                        labels[j].clone(),
                    ));
                }
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let bounded = (0..n).any(|u| leq[i * n + u] && leq[j * n + u]);
                if !bounded {
                    return Err(PosetError::NotDirected(labels[i].clone(), labels[j].clone()));
                }
            }
        }
        // finite + directed: an element above everything exists and is unique
        let maximum = (0..n)
            .find(|&m| (0..n).all(|e| leq[e * n + m]))
            .expect("directed finite poset has a maximum");
        Ok(DirectedPoset {
            labels,
            index,
            leq,
            maximum,
        })
    }

    pub fn singleton(label: &str) -> DirectedPoset {
        DirectedPoset::new(&[label], &[]).expect("singleton poset is valid")
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn index_of(&self, label: &str) -> Result<usize, PosetError> {
        self.index
            .get(label)
            .copied()
            .ok_or_else(|| PosetError::UnknownElement(label.to_string()))
    }

    pub fn leq(&self, a: usize, b: usize) -> bool {
        self.leq[a * self.len() + b]
    }

    /// Index of the unique maximum element.
    pub fn maximum(&self) -> usize {
        self.maximum
    }

    /// All ordered pairs `(a, b)` with `a <= b`, in iteration order.
    pub fn comparable_pairs(&self) -> Vec<(usize, usize)> {
        let n = self.len();
        let mut pairs = Vec::new();
        for a in 0..n {
            for b in 0..n {
                if self.leq(a, b) {
                    pairs.push((a, b));
                }
            }
        }
        pairs
    }

    /// First common upper bound of `a` and `b` in iteration order.
    pub fn upper_bound(&self, a: usize, b: usize) -> usize {
        (0..self.len())
            .find(|&u| self.leq(a, u) && self.leq(b, u))
            .expect("directed poset has an upper bound for every pair")
    }

    /// All common upper bounds of `a` and `b`, in iteration order.
    pub fn upper_bounds(&self, a: usize, b: usize) -> Vec<usize> {
        (0..self.len())
            .filter(|&u| self.leq(a, u) && self.leq(b, u))
            .collect()
    }

    /// The branch `{x : x <= mu}` with the induced order; its maximum is `mu`.
    /// Also returns the embedding of branch indices into `self` indices.
    pub fn branch(&self, mu: usize) -> (DirectedPoset, Vec<usize>) {
        let members: Vec<usize> = (0..self.len()).filter(|&e| self.leq(e, mu)).collect();
        let labels: Vec<String> = members.iter().map(|&e| self.labels[e].clone()).collect();
        let mut pairs = Vec::new();
        for (i, &a) in members.iter().enumerate() {
            for (j, &b) in members.iter().enumerate() {
                if self.leq(a, b) {
                    pairs.push((labels[i].clone(), labels[j].clone()));
                }
            }
        }
        let sub = DirectedPoset::new(&labels, &pairs).expect("branch of a valid poset is valid");
        (sub, members)
    }

    /// Product poset with componentwise order; labels are `(p,q)` and the
    /// iteration order is left-factor major.
    pub fn product(&self, other: &DirectedPoset) -> DirectedPoset {
        let mut labels = Vec::with_capacity(self.len() * other.len());
        for p in &self.labels {
            for q in &other.labels {
                labels.push(format!("({p},{q})"));
            }
        }
        let m = other.len();
        let mut pairs = Vec::new();
        for a1 in 0..self.len() {
            for a2 in 0..other.len() {
                for b1 in 0..self.len() {
                    for b2 in 0..other.len() {
                        if self.leq(a1, b1) && other.leq(a2, b2) {
                            pairs.push((labels[a1 * m + a2].clone(), labels[b1 * m + b2].clone()));
                        }
                    }
                }
            }
        }
        DirectedPoset::new(&labels, &pairs).expect("product of directed posets is directed")
    }

    /// Index into the product poset built by [`DirectedPoset::product`].
    pub fn product_index(&self, other: &DirectedPoset, i: usize, j: usize) -> usize {
        i * other.len() + j
    }

    pub fn into_arc(self) -> Arc<DirectedPoset> {
        Arc::new(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(labels: &[&str]) -> DirectedPoset {
        let pairs: Vec<(&str, &str)> = labels.windows(2).map(|w| (w[0], w[1])).collect();
        DirectedPoset::new(labels, &pairs).unwrap()
    }

    fn diamond() -> DirectedPoset {
        DirectedPoset::new(
            &["a", "b", "c", "d"],
            &[("a", "b"), ("a", "c"), ("b", "d"), ("c", "d")],
        )
        .unwrap()
    }

    #[test]
    fn singleton_is_valid() {
        let p = DirectedPoset::new(&["a"], &[("a", "a")]).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p.maximum(), 0);
    }

    #[test]
    fn two_elements_with_common_top() {
        // exhaustive upper-bound check: every pair of {a,b,c} with a<=c, b<=c
        let p = DirectedPoset::new(&["a", "b", "c"], &[("a", "c"), ("b", "c")]).unwrap();
        assert_eq!(p.label(p.maximum()), "c");
        for i in 0..3 {
            for j in 0..3 {
                assert!(!p.upper_bounds(i, j).is_empty());
            }
        }
        // a and b are incomparable
        assert!(!p.leq(0, 1) && !p.leq(1, 0));
    }

    #[test]
    fn antichain_is_rejected() {
        let err = DirectedPoset::new(&["a", "b"], &[]).unwrap_err();
        assert!(matches!(err, PosetError::NotDirected(_, _)));
    }

    #[test]
    fn cycle_is_rejected() {
        let err = DirectedPoset::new(&["a", "b"], &[("a", "b"), ("b", "a")]).unwrap_err();
        assert!(matches!(err, PosetError::NotAntisymmetric(_, _)));
    }

    #[test]
    fn empty_is_rejected() {
        let err = DirectedPoset::new::<&str>(&[], &[]).unwrap_err();
        assert_eq!(err, PosetError::Empty);
    }

    #[test]
    fn closure_is_transitive() {
        let p = chain(&["a", "b", "c"]);
        // generating set had only a<=b, b<=c; closure must add a<=c
        assert!(p.leq(0, 2));
        let n = p.len();
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    if p.leq(a, b) && p.leq(b, c) {
                        assert!(p.leq(a, c));
                    }
                }
            }
        }
    }

    #[test]
    fn maximum_of_chain_and_diamond() {
        assert_eq!(chain(&["a", "b", "c"]).label(2), "c");
        let d = diamond();
        // exhaustive comparison: d dominates everything
        let m = d.maximum();
        assert_eq!(d.label(m), "d");
        for e in 0..d.len() {
            assert!(d.leq(e, m));
        }
    }

    #[test]
    fn branch_of_chain_and_diamond() {
        let c = chain(&["a", "b", "c"]);
        let (b, members) = c.branch(1);
        assert_eq!(b.labels(), &["a".to_string(), "b".to_string()]);
        assert_eq!(members, vec![0, 1]);
        assert_eq!(b.label(b.maximum()), "b");

        let d = diamond();
        let (whole, _) = d.branch(d.maximum());
        assert_eq!(whole, d);
        let (bb, _) = d.branch(1);
        assert_eq!(bb.labels(), &["a".to_string(), "b".to_string()]);
    }

    #[test]
    fn branch_at_maximum_is_identity() {
        for p in [chain(&["a", "b", "c"]), diamond()] {
            let (b, members) = p.branch(p.maximum());
            assert_eq!(b, p);
            assert_eq!(members, (0..p.len()).collect::<Vec<_>>());
        }
    }

    #[test]
    fn product_of_chains_is_a_grid() {
        let c2 = chain(&["0", "1"]);
        let prod = c2.product(&c2);
        // enumerated order pairs: 4 elements, diamond shape
        assert_eq!(prod.len(), 4);
        assert_eq!(prod.label(prod.maximum()), "(1,1)");
        // (0,1) and (1,0) are incomparable
        let i = prod.index_of("(0,1)").unwrap();
        let j = prod.index_of("(1,0)").unwrap();
        assert!(!prod.leq(i, j) && !prod.leq(j, i));

        let c3 = chain(&["x", "y", "z"]);
        let grid = c2.product(&c3);
        assert_eq!(grid.len(), 6);
        assert_eq!(grid.label(grid.maximum()), "(1,z)");
        // exhaustive directedness comes from validation inside `new`
    }

    #[test]
    fn singleton_product_is_singleton() {
        let s = DirectedPoset::singleton("a");
        let p = s.product(&s);
        assert_eq!(p.len(), 1);
    }
}
