//! Open knot vectors, C⁰ separator insertion and B-spline basis evaluation.
//!
//! All spaces live on `[0, 1]` with uniform elements. Breakpoints are stored
//! once with an explicit multiplicity, so raising the multiplicity of a knot
//! never involves a floating-point comparison: separators are addressed by
//! breakpoint index.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Open knot vector described by distinct breakpoints and their multiplicities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnotVector {
    breakpoints: Vec<f64>,
    multiplicities: Vec<usize>,
    degree: usize,
}

impl KnotVector {
    /// Uniform open knot vector with `elements` elements and single interior knots.
    pub fn open_uniform(elements: usize, degree: usize) -> Result<Self> {
        if elements < 1 {
            return Err(Error::InvalidSpline("element count must be at least 1".into()));
        }
        if degree < 1 {
            return Err(Error::InvalidSpline("degree must be at least 1".into()));
        }
        let breakpoints = (0..=elements)
            .map(|i| i as f64 / elements as f64)
            .collect();
        let mut multiplicities = vec![1; elements + 1];
        multiplicities[0] = degree + 1;
        multiplicities[elements] = degree + 1;
        Ok(Self {
            breakpoints,
            multiplicities,
            degree,
        })
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn multiplicities(&self) -> &[usize] {
        &self.multiplicities
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Total number of knots, counting repetitions.
    pub fn len(&self) -> usize {
        self.multiplicities.iter().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.breakpoints.is_empty()
    }

    pub fn element_count(&self) -> usize {
        self.breakpoints.len() - 1
    }

    /// Number of B-spline basis functions, `len - p - 1`.
    pub fn basis_count(&self) -> usize {
        self.len() - self.degree - 1
    }

    /// The knot sequence with every knot repeated by its multiplicity.
    pub fn expanded(&self) -> Vec<f64> {
        self.breakpoints
            .iter()
            .zip(&self.multiplicities)
            .flat_map(|(&b, &m)| std::iter::repeat_n(b, m))
            .collect()
    }
}

/// Free-function form of [`KnotVector::open_uniform`].
pub fn make_open_uniform_knots(elements: usize, degree: usize) -> Result<KnotVector> {
    KnotVector::open_uniform(elements, degree)
}

/// Values and first derivatives of the `p + 1` basis functions supported at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisEval {
    pub first_index: usize,
    pub values: Vec<f64>,
    pub derivs: Vec<f64>,
}

/// Classification of a basis function once the two boundary functions have
/// been eliminated by the Dirichlet condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BasisRole {
    /// Supported inside macroelement block `b` only.
    Block(usize),
    /// The interpolatory C⁰ function at separator knot `j · 2^{-ℓ}` (`1 ≤ j < 2^ℓ`).
    Separator(usize),
}

/// One-dimensional spline space: a knot vector plus its partitioning level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineSpace {
    knots: KnotVector,
    expanded: Vec<f64>,
    level: u32,
}

impl SplineSpace {
    /// Maximum-continuity C^{p-1} space on `elements` uniform elements.
    pub fn iga(elements: usize, degree: usize) -> Result<Self> {
        let knots = KnotVector::open_uniform(elements, degree)?;
        let expanded = knots.expanded();
        Ok(Self {
            knots,
            expanded,
            level: 0,
        })
    }

    /// IGA space refined by C⁰ separators up to partitioning `level`.
    pub fn riga(elements: usize, degree: usize, level: u32) -> Result<Self> {
        Self::iga(elements, degree)?.insert_separators(level)
    }

    /// Raise the multiplicity of the knots `j · 2^{-level}` to `p`.
    ///
    /// Requires a power-of-two element count `2^s` and `level ≤ s`; level 0
    /// returns the space unchanged.
    pub fn insert_separators(&self, level: u32) -> Result<Self> {
        let ne = self.elements();
        if !ne.is_power_of_two() {
            return Err(Error::InvalidSpline(format!(
                "separator insertion needs a power-of-two element count, got {ne}"
            )));
        }
        let s = ne.trailing_zeros();
        if level > s {
            return Err(Error::InvalidSpline(format!(
                "partitioning level {level} exceeds log2(ne) = {s}"
            )));
        }
        let mut knots = self.knots.clone();
        let p = knots.degree;
        let stride = ne >> level;
        for j in 1..(1usize << level) {
            let m = &mut knots.multiplicities[j * stride];
            *m = (*m).max(p);
        }
        let expanded = knots.expanded();
        Ok(Self {
            knots,
            expanded,
            level: self.level.max(level),
        })
    }

    pub fn knots(&self) -> &KnotVector {
        &self.knots
    }

    pub fn expanded_knots(&self) -> &[f64] {
        &self.expanded
    }

    pub fn degree(&self) -> usize {
        self.knots.degree
    }

    pub fn elements(&self) -> usize {
        self.knots.element_count()
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn basis_count(&self) -> usize {
        self.knots.basis_count()
    }

    /// Elements per macroelement block, `ne / 2^ℓ`.
    pub fn block_size(&self) -> usize {
        self.elements() >> self.level
    }

    /// Index of the breakpoint equal to `x`, if any.
    pub fn breakpoint_index(&self, x: f64) -> Option<usize> {
        self.knots.breakpoints.iter().position(|&b| b == x)
    }

    /// Smoothness class `p - m` across interior breakpoint `index`.
    ///
    /// # Panics
    /// If `index` is not an interior breakpoint.
    pub fn continuity_at(&self, index: usize) -> usize {
        assert!(
            index > 0 && index < self.elements(),
            "breakpoint {index} is not interior"
        );
        self.degree() - self.knots.multiplicities[index]
    }

    /// Knot-span index of element `e` (the last knot position equal to its left end).
    pub fn element_span(&self, element: usize) -> usize {
        self.knots.multiplicities[..=element].iter().sum::<usize>() - 1
    }

    /// Index of the first basis function supported on element `e`.
    pub fn element_first_basis(&self, element: usize) -> usize {
        self.element_span(element) - self.degree()
    }

    /// Evaluate the bases supported at `x`.
    ///
    /// Interior breakpoints use the right limit, `x = 1` the left limit.
    pub fn eval(&self, x: f64) -> Result<BasisEval> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::OutOfDomain(x));
        }
        let bp = &self.knots.breakpoints;
        let e = (bp.partition_point(|&b| b <= x) - 1).min(self.elements() - 1);
        Ok(self.eval_in_element(e, x))
    }

    /// Evaluate with the polynomial piece of element `e`, also at its end points.
    pub fn eval_in_element(&self, element: usize, x: f64) -> BasisEval {
        let span = self.element_span(element);
        let (values, derivs) = self.basis_and_derivs(span, x);
        BasisEval {
            first_index: span - self.degree(),
            values,
            derivs,
        }
    }

    fn basis_and_derivs(&self, span: usize, x: f64) -> (Vec<f64>, Vec<f64>) {
        let p = self.degree();
        let u = &self.expanded;
        let mut n = vec![0.0; p + 1];
        let mut left = vec![0.0; p + 1];
        let mut right = vec![0.0; p + 1];
        let mut lower = Vec::new();
        n[0] = 1.0;
        for j in 1..=p {
            if j == p {
                lower = n[..p].to_vec();
            }
            left[j] = x - u[span + 1 - j];
            right[j] = u[span + j] - x;
            let mut saved = 0.0;
            for r in 0..j {
                let temp = n[r] / (right[r + 1] + left[j - r]);
                n[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            n[j] = saved;
        }

        // N'_{i,p} = p/(u_{i+p}-u_i) N_{i,p-1} - p/(u_{i+p+1}-u_{i+1}) N_{i+1,p-1}
        let pf = p as f64;
        let mut d = vec![0.0; p + 1];
        for (r, dr) in d.iter_mut().enumerate() {
            let i = span - p + r;
            if r >= 1 {
                let den = u[i + p] - u[i];
                if den > 0.0 {
                    *dr += pf / den * lower[r - 1];
                }
            }
            if r < p {
                let den = u[i + p + 1] - u[i + 1];
                if den > 0.0 {
                    *dr -= pf / den * lower[r];
                }
            }
        }
        (n, d)
    }

    /// Pre-Dirichlet indices of the interpolatory C⁰ bases at the separator
    /// knots `j · 2^{-ℓ}`, `j = 1..2^ℓ`.
    pub fn separator_bases(&self) -> Vec<usize> {
        let stride = self.block_size();
        (1..(1usize << self.level))
            .map(|j| {
                // The separator knot has multiplicity p; the function whose
                // inner knots are all equal to it starts one position earlier.
                let first_copy: usize = self.knots.multiplicities[..j * stride].iter().sum();
                first_copy - 1
            })
            .collect()
    }

    /// Roles of the interior (post-Dirichlet) bases, in interior index order.
    pub fn interior_roles(&self) -> Vec<BasisRole> {
        let n = self.basis_count();
        let seps = self.separator_bases();
        let scale = (1usize << self.level) as f64;
        (1..n - 1)
            .map(|i| match seps.iter().position(|&s| s == i) {
                Some(j) => BasisRole::Separator(j + 1),
                None => BasisRole::Block((self.expanded[i] * scale).floor() as usize),
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Direct evaluation of the Cox–de Boor recursion for a single basis.
    fn cox_de_boor(u: &[f64], i: usize, p: usize, x: f64, last_span: usize) -> f64 {
        if p == 0 {
            let inside = u[i] <= x && x < u[i + 1];
            // x = 1 belongs to the last non-empty span.
            let at_end = x == u[u.len() - 1] && i == last_span;
            return if inside || at_end { 1.0 } else { 0.0 };
        }
        let mut v = 0.0;
        let d1 = u[i + p] - u[i];
        if d1 > 0.0 {
            v += (x - u[i]) / d1 * cox_de_boor(u, i, p - 1, x, last_span);
        }
        let d2 = u[i + p + 1] - u[i + 1];
        if d2 > 0.0 {
            v += (u[i + p + 1] - x) / d2 * cox_de_boor(u, i + 1, p - 1, x, last_span);
        }
        v
    }

    fn oracle_all(space: &SplineSpace, x: f64) -> Vec<f64> {
        let u = space.expanded_knots();
        let n = space.basis_count();
        (0..n)
            .map(|i| cox_de_boor(u, i, space.degree(), x, n - 1))
            .collect()
    }

    fn dense(space: &SplineSpace, x: f64) -> Vec<f64> {
        let e = space.eval(x).unwrap();
        let mut out = vec![0.0; space.basis_count()];
        for (k, v) in e.values.iter().enumerate() {
            out[e.first_index + k] = *v;
        }
        out
    }

    #[test]
    fn open_uniform_examples() {
        let k = make_open_uniform_knots(4, 2).unwrap();
        assert_eq!(k.breakpoints(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(k.multiplicities(), &[3, 1, 1, 1, 3]);
        assert_eq!(k.basis_count(), 6);

        let k = make_open_uniform_knots(8, 3).unwrap();
        assert_eq!(k.len(), 15);
        assert_eq!(k.basis_count(), 11);

        let k = make_open_uniform_knots(1, 1).unwrap();
        assert_eq!(k.breakpoints(), &[0.0, 1.0]);
        assert_eq!(k.multiplicities(), &[2, 2]);
        assert_eq!(k.basis_count(), 2);
    }

    #[test]
    fn open_uniform_rejects_bad_input() {
        assert!(make_open_uniform_knots(0, 2).is_err());
        assert!(make_open_uniform_knots(4, 0).is_err());
    }

    #[test]
    fn separator_insertion_examples() {
        let iga = SplineSpace::iga(8, 3).unwrap();
        let one = iga.insert_separators(1).unwrap();
        assert_eq!(one.knots().multiplicities()[4], 3);
        assert_eq!(iga.basis_count(), 11);
        assert_eq!(one.basis_count(), 13);

        let fea = iga.insert_separators(3).unwrap();
        assert!(fea.knots().multiplicities()[1..8].iter().all(|&m| m == 3));
        assert!((1..8).all(|b| fea.continuity_at(b) == 0));

        assert_eq!(iga.insert_separators(0).unwrap(), iga);
    }

    #[test]
    fn separator_insertion_errors() {
        let iga = SplineSpace::iga(8, 3).unwrap();
        assert!(iga.insert_separators(4).is_err());
        let odd = SplineSpace::iga(6, 3).unwrap();
        assert!(odd.insert_separators(1).is_err());
    }

    #[test]
    fn continuity_examples() {
        let iga = SplineSpace::iga(8, 3).unwrap();
        assert_eq!(iga.continuity_at(3), 2);
        let s = SplineSpace::riga(8, 3, 2).unwrap();
        assert_eq!(s.continuity_at(s.breakpoint_index(0.25).unwrap()), 0);
        assert_eq!(s.continuity_at(s.breakpoint_index(0.125).unwrap()), 2);
        assert_eq!(s.continuity_at(s.breakpoint_index(0.5).unwrap()), 0);
    }

    #[test]
    fn hat_function_midpoint() {
        let s = SplineSpace::iga(1, 1).unwrap();
        let e = s.eval(0.5).unwrap();
        assert_eq!(e.values, vec![0.5, 0.5]);
        assert_eq!(e.derivs, vec![-1.0, 1.0]);
    }

    #[test]
    fn matches_recursion_oracle() {
        let s = SplineSpace::iga(4, 2).unwrap();
        let got = dense(&s, 0.1);
        let want = oracle_all(&s, 0.1);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-15, "{got:?} vs {want:?}");
        }
        // Frozen from hand evaluation of the recursion on (0,0,0,1/4,1/2,...).
        assert!((want[0] - 0.36).abs() < 1e-15);
        assert!((want[1] - 0.56).abs() < 1e-15);
        assert!((want[2] - 0.08).abs() < 1e-15);
    }

    #[test]
    fn matches_oracle_on_refined_spaces_and_knots() {
        for p in 1..=5 {
            for level in 0..=3 {
                let s = SplineSpace::riga(8, p, level).unwrap();
                for k in 0..=64 {
                    let x = k as f64 / 64.0;
                    let got = dense(&s, x);
                    let want = oracle_all(&s, x);
                    for (g, w) in got.iter().zip(&want) {
                        assert!((g - w).abs() < 1e-13, "p={p} l={level} x={x}");
                    }
                }
            }
        }
    }

    #[test]
    fn right_end_uses_left_limit() {
        let s = SplineSpace::iga(4, 3).unwrap();
        let e = s.eval(1.0).unwrap();
        assert_eq!(e.first_index, s.basis_count() - 4);
        assert_eq!(*e.values.last().unwrap(), 1.0);
        assert!(s.eval(1.0 + 1e-12).is_err());
        assert!(s.eval(-1e-12).is_err());
    }

    #[test]
    fn separator_bases_are_interpolatory() {
        let s = SplineSpace::riga(8, 3, 2).unwrap();
        let seps = s.separator_bases();
        assert_eq!(seps.len(), 3);
        for (j, &i) in seps.iter().enumerate() {
            let x = (j + 1) as f64 * 0.25;
            let v = dense(&s, x);
            assert!((v[i] - 1.0).abs() < 1e-15);
        }
        let roles = s.interior_roles();
        assert_eq!(roles.len(), s.basis_count() - 2);
        let n_sep = roles.iter().filter(|r| matches!(r, BasisRole::Separator(_))).count();
        assert_eq!(n_sep, 3);
        // Blocks appear in order, separators sit between consecutive blocks.
        let mut last_block = 0;
        for r in &roles {
            match *r {
                BasisRole::Block(b) => {
                    assert!(b >= last_block);
                    last_block = b;
                }
                BasisRole::Separator(j) => assert_eq!(j, last_block + 1),
            }
        }
    }

    #[test]
    fn local_support_count() {
        let s = SplineSpace::riga(16, 4, 2).unwrap();
        for k in 0..200 {
            let x = (k as f64 + 0.37) / 200.0;
            if s.breakpoint_index(x).is_some() {
                continue;
            }
            let nz = dense(&s, x).iter().filter(|v| **v != 0.0).count();
            assert_eq!(nz, 5);
        }
    }

    proptest! {
        #[test]
        fn partition_of_unity(x in 0.0f64..=1.0, p in 1usize..=5, s in 0u32..=5, l in 0u32..=5) {
            let ne = 1usize << s;
            let space = SplineSpace::riga(ne, p, l.min(s)).unwrap();
            let e = space.eval(x).unwrap();
            let sum: f64 = e.values.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-13);
            prop_assert!(e.values.iter().all(|&v| v >= -1e-15));
            prop_assert!(e.derivs.iter().sum::<f64>().abs() < 1e-9 * (ne * p) as f64);
        }

        #[test]
        fn derivative_matches_finite_difference(x in 0.01f64..0.99, p in 1usize..=5, l in 0u32..=3) {
            let space = SplineSpace::riga(8, p, l).unwrap();
            // Stay inside one polynomial piece.
            let e_idx = ((x * 8.0).floor() as usize).min(7);
            let a = e_idx as f64 / 8.0;
            let h = 1e-6;
            prop_assume!(x - a > 2.0 * h && a + 0.125 - x > 2.0 * h);
            let c = space.eval_in_element(e_idx, x);
            let fp = space.eval_in_element(e_idx, x + h);
            let fm = space.eval_in_element(e_idx, x - h);
            for k in 0..=p {
                let fd = (fp.values[k] - fm.values[k]) / (2.0 * h);
                prop_assert!((fd - c.derivs[k]).abs() < 1e-6, "k={} fd={} d={}", k, fd, c.derivs[k]);
            }
        }

        #[test]
        fn dimension_law(s in 0u32..=6, p in 1usize..=5, l in 0u32..=6) {
            let l = l.min(s);
            let ne = 1usize << s;
            let space = SplineSpace::riga(ne, p, l).unwrap();
            prop_assert_eq!(space.basis_count(), ne + p + ((1usize << l) - 1) * (p - 1));
        }
    }
}
