//! Exact algebra of differential polynomials in a single periodic function u.
//!
//! A monomial is a multiset of derivative orders: `{0, 1}` stands for
//! `u * u'`. Polynomials carry exact rational coefficients so the quadratic
//! source `C_l` of the order-l hierarchy and its antiderivative `F` (with
//! `d_x F = -C_l`) can be certified as identities rather than checked
//! numerically.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::field::PeriodicField;
use crate::real::Real;
use crate::{c, Error, Result};

pub fn rat(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Product of derivatives of u, stored as a sorted multiset of orders.
/// `DiffMonomial::new([1, 0])` and `new([0, 1])` are the same monomial u*u'.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DiffMonomial {
    factors: Vec<u32>,
}

impl DiffMonomial {
    pub fn new(mut factors: Vec<u32>) -> Self {
        factors.sort_unstable();
        DiffMonomial { factors }
    }

    pub fn factors(&self) -> &[u32] {
        &self.factors
    }

    pub fn degree(&self) -> usize {
        self.factors.len()
    }

    /// Highest derivative order appearing in the monomial.
    pub fn order(&self) -> u32 {
        self.factors.last().copied().unwrap_or(0)
    }
}

impl PartialOrd for DiffMonomial {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for DiffMonomial {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // Degree-major, then lexicographic: gives the deterministic dump order.
        (self.factors.len(), &self.factors).cmp(&(other.factors.len(), &other.factors))
    }
}

/// Differential polynomial: canonical monomial -> nonzero rational coefficient.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct DiffPoly {
    terms: BTreeMap<DiffMonomial, BigRational>,
}

impl DiffPoly {
    pub fn zero() -> Self {
        DiffPoly::default()
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (DiffMonomial, BigRational)>) -> Self {
        let mut p = DiffPoly::zero();
        for (m, c) in terms {
            p.add_term(m, c);
        }
        p
    }

    pub fn add_term(&mut self, monomial: DiffMonomial, coeff: BigRational) {
        if coeff.is_zero() {
            return;
        }
        let entry = self.terms.entry(monomial);
        match entry {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(coeff);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let sum = o.get() + &coeff;
                if sum.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = sum;
                }
            }
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&DiffMonomial, &BigRational)> {
        self.terms.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, monomial: &DiffMonomial) -> BigRational {
        self.terms.get(monomial).cloned().unwrap_or_else(BigRational::zero)
    }

    /// Highest derivative order over all monomials.
    pub fn order(&self) -> u32 {
        self.terms.keys().map(DiffMonomial::order).max().unwrap_or(0)
    }

    pub fn max_degree(&self) -> usize {
        self.terms.keys().map(DiffMonomial::degree).max().unwrap_or(0)
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }

    pub fn scale(&self, a: &BigRational) -> Self {
        if a.is_zero() {
            return DiffPoly::zero();
        }
        DiffPoly {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), c * a)).collect(),
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = DiffPoly::zero();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                let mut factors = ma.factors.clone();
                factors.extend_from_slice(&mb.factors);
                out.add_term(DiffMonomial::new(factors), ca * cb);
            }
        }
        out
    }

    /// The x-derivation: acts on each monomial by the Leibniz rule,
    /// raising one factor's order at a time.
    pub fn derivative(&self) -> Self {
        let mut out = DiffPoly::zero();
        for (m, coeff) in &self.terms {
            for i in 0..m.factors.len() {
                let mut factors = m.factors.clone();
                factors[i] += 1;
                out.add_term(DiffMonomial::new(factors), coeff.clone());
            }
        }
        out
    }

    /// Substitutes spectral derivatives of u and multiplies pointwise on a
    /// grid fine enough to hold the product bandwidth, then projects back.
    pub fn evaluate<T: Real>(&self, u: &PeriodicField<T>) -> PeriodicField<T> {
        let n = u.grid().len();
        let pad = self.max_degree().max(2);
        let fine_n = n * pad;
        let fine_u = u.resample(fine_n).expect("padding cannot fail");
        let mut acc = PeriodicField::zero(fine_u.grid());
        for (m, coeff) in &self.terms {
            let mut prod = PeriodicField::constant(fine_u.grid(), T::one());
            for &order in &m.factors {
                prod = prod.mul_pointwise(&fine_u.derivative(order as usize));
            }
            acc = acc.axpy(c::<T>(coeff.to_f64_lossy()), &prod);
        }
        acc.resample(n).expect("projection cannot fail")
    }

    /// Bilinear evaluation of a degree-2 polynomial: each monomial
    /// `(m1, m2)` contributes `c/2 * [(d^m1 v)(d^m2 w) + (d^m1 w)(d^m2 v)]`,
    /// so summing over a Cauchy convolution of Taylor jets reproduces the
    /// Taylor coefficients of the full quadratic expression.
    pub fn evaluate_bilinear<T: Real>(
        &self,
        v: &PeriodicField<T>,
        w: &PeriodicField<T>,
    ) -> PeriodicField<T> {
        let mut acc = PeriodicField::zero(v.grid());
        for (m, coeff) in &self.terms {
            assert_eq!(m.degree(), 2, "bilinear evaluation needs a quadratic polynomial");
            let (m1, m2) = (m.factors[0] as usize, m.factors[1] as usize);
            let a = v.derivative(m1).mul_dealiased(&w.derivative(m2));
            let b = w.derivative(m1).mul_dealiased(&v.derivative(m2));
            let half = c::<T>(coeff.to_f64_lossy() / 2.0);
            acc = acc.axpy(half, &a.add(&b));
        }
        acc
    }
}

trait ToF64Lossy {
    fn to_f64_lossy(&self) -> f64;
}

impl ToF64Lossy for BigRational {
    fn to_f64_lossy(&self) -> f64 {
        num_traits::ToPrimitive::to_f64(self).expect("rational fits in f64")
    }
}

impl fmt::Display for DiffPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (m, coeff)) in self.terms.iter().enumerate() {
            let neg = coeff.is_negative();
            let mag = coeff.abs();
            if i == 0 {
                if neg {
                    write!(f, "-")?;
                }
            } else if neg {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            let show_coeff = !mag.is_one() || m.factors.is_empty();
            if show_coeff {
                write!(f, "{mag}")?;
            }
            let mut first_factor = !show_coeff;
            let mut idx = 0;
            while idx < m.factors.len() {
                let order = m.factors[idx];
                let mut mult = 1;
                while idx + mult < m.factors.len() && m.factors[idx + mult] == order {
                    mult += 1;
                }
                idx += mult;
                if !first_factor {
                    write!(f, " ")?;
                }
                first_factor = false;
                if order == 0 {
                    write!(f, "u")?;
                } else {
                    write!(f, "u[{order}]")?;
                }
                if mult > 1 {
                    write!(f, "^{mult}")?;
                }
            }
        }
        Ok(())
    }
}

/// Applies `A_l = sum_j (-1)^j d_x^(2j)` to a differential polynomial.
fn apply_a_poly(p: &DiffPoly, l: usize) -> DiffPoly {
    let mut out = DiffPoly::zero();
    let mut current = p.clone();
    let mut sign = BigRational::one();
    out = out.add(&current);
    for _ in 1..=l {
        current = current.derivative().derivative();
        sign = -sign;
        out = out.add(&current.scale(&sign));
    }
    out
}

/// Exact expansion of the quadratic source
/// `C_l(u) = -u A_l u' + A_l(u u') - 2 u' A_l u`.
pub fn expand_cl(l: usize) -> DiffPoly {
    let u = DiffPoly::from_terms([(DiffMonomial::new(vec![0]), BigRational::one())]);
    let ux = DiffPoly::from_terms([(DiffMonomial::new(vec![1]), BigRational::one())]);
    let minus_one = -BigRational::one();
    let minus_two = rat(-2, 1);

    let term1 = u.mul(&apply_a_poly(&ux, l)).scale(&minus_one);
    let term2 = apply_a_poly(&u.mul(&ux), l);
    let term3 = ux.mul(&apply_a_poly(&u, l)).scale(&minus_two);
    term1.add(&term2).add(&term3)
}

/// Solves `d_x F = -C_l` exactly over quadratic monomials of order at most
/// 2l-1 (each factor differentiated at most 2l-1 times). The solution is
/// unique in that class because the derivation has no quadratic kernel once
/// constants are excluded from the ansatz.
pub fn antiderivative_f(l: usize) -> Result<DiffPoly> {
    let target = expand_cl(l).scale(&rat(-1, 1));
    let max_order = (2 * l - 1) as u32;
    let basis: Vec<DiffMonomial> = (0..=max_order)
        .flat_map(|m1| (m1..=max_order).map(move |m2| DiffMonomial::new(vec![m1, m2])))
        .collect();

    // Row index set: every monomial reachable by differentiating the basis,
    // plus everything in the target.
    let mut row_index: BTreeMap<DiffMonomial, usize> = BTreeMap::new();
    let mut derived: Vec<DiffPoly> = Vec::with_capacity(basis.len());
    for b in &basis {
        let single = DiffPoly::from_terms([(b.clone(), BigRational::one())]);
        let d = single.derivative();
        for (m, _) in d.terms() {
            let next = row_index.len();
            row_index.entry(m.clone()).or_insert(next);
        }
        derived.push(d);
    }
    for (m, _) in target.terms() {
        let next = row_index.len();
        row_index.entry(m.clone()).or_insert(next);
    }

    let rows = row_index.len();
    let cols = basis.len();
    let mut matrix = vec![vec![BigRational::zero(); cols + 1]; rows];
    for (j, d) in derived.iter().enumerate() {
        for (m, coeff) in d.terms() {
            matrix[row_index[m]][j] = coeff.clone();
        }
    }
    for (m, coeff) in target.terms() {
        matrix[row_index[m]][cols] = coeff.clone();
    }

    // Exact Gaussian elimination.
    let mut pivot_row_of_col = vec![usize::MAX; cols];
    let mut r = 0;
    for col in 0..cols {
        let Some(p) = (r..rows).find(|&i| !matrix[i][col].is_zero()) else {
            continue;
        };
        matrix.swap(r, p);
        let inv = matrix[r][col].clone();
        for x in matrix[r][col..].iter_mut() {
            *x = &*x / &inv;
        }
        for i in 0..rows {
            if i != r && !matrix[i][col].is_zero() {
                let factor = matrix[i][col].clone();
                for cidx in col..=cols {
                    let sub = &matrix[r][cidx] * &factor;
                    matrix[i][cidx] = &matrix[i][cidx] - sub;
                }
            }
        }
        pivot_row_of_col[col] = r;
        r += 1;
    }
    // Any leftover nonzero right-hand side means the system is inconsistent.
    for row in matrix.iter().skip(r) {
        if !row[cols].is_zero() {
            return Err(Error::NoAntiderivative { l });
        }
    }

    let mut f = DiffPoly::zero();
    for (col, b) in basis.iter().enumerate() {
        let row = pivot_row_of_col[col];
        if row != usize::MAX && !matrix[row][cols].is_zero() {
            f.add_term(b.clone(), matrix[row][cols].clone());
        }
    }
    // Certify before returning.
    let residual = f.derivative().add(&expand_cl(l));
    if !residual.is_zero() {
        return Err(Error::NoAntiderivative { l });
    }
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::PeriodicGrid;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn mono(factors: &[u32]) -> DiffMonomial {
        DiffMonomial::new(factors.to_vec())
    }

    #[test]
    fn cl_at_order_one_is_the_classical_source() {
        let c1 = expand_cl(1);
        let expect = DiffPoly::from_terms([
            (mono(&[0, 1]), rat(-2, 1)),
            (mono(&[1, 2]), rat(-1, 1)),
        ]);
        assert_eq!(c1, expect, "C_1 should be -2 u u' - u' u''");
    }

    /// Frozen from an independent computer-algebra expansion of
    /// -u A_l u' + A_l(u u') - 2 u' A_l u.
    #[test]
    fn cl_at_orders_two_and_three_match_frozen_expansions() {
        let c2 = expand_cl(2);
        let expect2 = DiffPoly::from_terms([
            (mono(&[0, 1]), rat(-2, 1)),
            (mono(&[1, 2]), rat(-1, 1)),
            (mono(&[1, 4]), rat(3, 1)),
            (mono(&[2, 3]), rat(10, 1)),
        ]);
        assert_eq!(c2, expect2);

        let c3 = expand_cl(3);
        let expect3 = DiffPoly::from_terms([
            (mono(&[0, 1]), rat(-2, 1)),
            (mono(&[1, 2]), rat(-1, 1)),
            (mono(&[1, 4]), rat(3, 1)),
            (mono(&[1, 6]), rat(-5, 1)),
            (mono(&[2, 3]), rat(10, 1)),
            (mono(&[2, 5]), rat(-21, 1)),
            (mono(&[3, 4]), rat(-35, 1)),
        ]);
        assert_eq!(c3, expect3);
    }

    #[test]
    fn antiderivative_at_order_one_is_the_classical_pressure_source() {
        let f = antiderivative_f(1).unwrap();
        let expect = DiffPoly::from_terms([
            (mono(&[0, 0]), rat(1, 1)),
            (mono(&[1, 1]), rat(1, 2)),
        ]);
        assert_eq!(f, expect, "F should be u^2 + (u')^2/2");
    }

    /// Frozen from the same independent computer-algebra solve.
    #[test]
    fn antiderivative_at_orders_two_and_three_match_frozen_solutions() {
        let f2 = antiderivative_f(2).unwrap();
        let expect2 = DiffPoly::from_terms([
            (mono(&[0, 0]), rat(1, 1)),
            (mono(&[1, 1]), rat(1, 2)),
            (mono(&[1, 3]), rat(-3, 1)),
            (mono(&[2, 2]), rat(-7, 2)),
        ]);
        assert_eq!(f2, expect2);

        let f3 = antiderivative_f(3).unwrap();
        let expect3 = DiffPoly::from_terms([
            (mono(&[0, 0]), rat(1, 1)),
            (mono(&[1, 1]), rat(1, 2)),
            (mono(&[1, 3]), rat(-3, 1)),
            (mono(&[1, 5]), rat(5, 1)),
            (mono(&[2, 2]), rat(-7, 2)),
            (mono(&[2, 4]), rat(16, 1)),
            (mono(&[3, 3]), rat(19, 2)),
        ]);
        assert_eq!(f3, expect3);
    }

    #[test]
    fn antiderivative_identity_holds_exactly_up_to_order_four() {
        for l in 1..=4 {
            let f = antiderivative_f(l).unwrap();
            assert!(
                f.derivative().add(&expand_cl(l)).is_zero(),
                "d_x F + C_l must vanish identically at l = {l}"
            );
            assert!(
                f.order() <= (2 * l - 1) as u32,
                "F at l = {l} uses derivatives above order 2l-1"
            );
        }
    }

    #[test]
    fn dump_format_is_stable() {
        assert_eq!(expand_cl(1).to_string(), "-2 u u[1] - u[1] u[2]");
        assert_eq!(antiderivative_f(1).unwrap().to_string(), "u^2 + 1/2 u[1]^2");
        assert_eq!(
            expand_cl(2).to_string(),
            "-2 u u[1] - u[1] u[2] + 3 u[1] u[4] + 10 u[2] u[3]"
        );
        assert_eq!(
            antiderivative_f(2).unwrap().to_string(),
            "u^2 + 1/2 u[1]^2 - 3 u[1] u[3] - 7/2 u[2]^2"
        );
        assert_eq!(DiffPoly::zero().to_string(), "0");
    }

    /// Random field with 1/w^2 amplitude decay, so high derivatives stay O(10)
    /// and absolute tolerances on products remain meaningful.
    fn gentle_random_field(g: PeriodicGrid, max_mode: usize, seed: u64) -> PeriodicField<f64> {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut amps: Vec<(f64, f64, f64)> = Vec::new();
        for w in 1..=max_mode {
            let a: f64 = rng.gen_range(-1.0..1.0);
            let b: f64 = rng.gen_range(-1.0..1.0);
            let decay = (w * w) as f64;
            amps.push((w as f64, a / decay, b / decay));
        }
        PeriodicField::from_fn(g, |x| {
            amps.iter()
                .map(|&(w, a, b)| {
                    let arg: f64 = 2.0 * std::f64::consts::PI * w * x;
                    a * arg.cos() + b * arg.sin()
                })
                .sum()
        })
    }

    /// Oracle: naive pointwise evaluation at 4x resolution, then projection.
    /// Runs the quadratic C_1 and a batch of random polynomials through it.
    #[test]
    fn evaluate_matches_naive_fine_grid_product() {
        let g = PeriodicGrid::new(64).unwrap();
        let u = gentle_random_field(g, 6, 21);
        let p = expand_cl(1);
        let via_evaluate = p.evaluate(&u);

        let fine = u.resample(256).unwrap();
        let naive_fine = fine
            .mul_pointwise(&fine.derivative(1))
            .scale(-2.0)
            .sub(&fine.derivative(1).mul_pointwise(&fine.derivative(2)));
        let naive = naive_fine.resample(64).unwrap();
        let err = via_evaluate.sub(&naive).sup_norm();
        assert!(err <= 1e-10, "evaluate disagrees with 4x naive product: {err}");

        let mut rng = ChaCha8Rng::seed_from_u64(31);
        use rand::Rng;
        for trial in 0..10 {
            let mut poly = DiffPoly::zero();
            for _ in 0..rng.gen_range(1..4usize) {
                let deg = rng.gen_range(1..=3usize);
                let factors: Vec<u32> = (0..deg).map(|_| rng.gen_range(0..3u32)).collect();
                poly.add_term(DiffMonomial::new(factors), rat(rng.gen_range(-6..=6), 1));
            }
            let v = gentle_random_field(g, 5, 100 + trial);
            let got = poly.evaluate(&v);
            let fine_v = v.resample(256).unwrap();
            let mut acc = PeriodicField::zero(fine_v.grid());
            for (m, coeff) in poly.terms() {
                let mut prod = PeriodicField::constant(fine_v.grid(), 1.0);
                for &order in m.factors() {
                    prod = prod.mul_pointwise(&fine_v.derivative(order as usize));
                }
                acc = acc.axpy(num_traits::ToPrimitive::to_f64(coeff).unwrap(), &prod);
            }
            let expect = acc.resample(64).unwrap();
            let err = got.sub(&expect).sup_norm();
            let tol = 1e-10 * (1.0 + expect.sup_norm());
            assert!(
                err <= tol,
                "random polynomial trial {trial} disagrees with 4x oracle: {err} (tol {tol})"
            );
        }
    }

    #[test]
    fn evaluate_bilinear_diagonal_matches_evaluate() {
        let g = PeriodicGrid::new(64).unwrap();
        let u = gentle_random_field(g, 6, 22);
        let f = antiderivative_f(2).unwrap();
        let quad = f.evaluate(&u);
        let bil = f.evaluate_bilinear(&u, &u);
        let err = quad.sub(&bil).sup_norm();
        let tol = 1e-10 * (1.0 + quad.sup_norm());
        assert!(err <= tol, "bilinear diagonal drifted from direct evaluation: {err}");
    }

    fn arb_diffpoly() -> impl Strategy<Value = DiffPoly> {
        proptest::collection::vec(
            (
                proptest::collection::vec(0u32..4, 1..3),
                -9i64..9,
                1i64..5,
            ),
            1..5,
        )
        .prop_map(|terms| {
            DiffPoly::from_terms(
                terms
                    .into_iter()
                    .map(|(factors, num, den)| (DiffMonomial::new(factors), rat(num, den))),
            )
        })
    }

    proptest! {
        /// The derivation property, exactly: d(p*q) = dp*q + p*dq.
        #[test]
        fn derivative_is_a_derivation(p in arb_diffpoly(), q in arb_diffpoly()) {
            let lhs = p.mul(&q).derivative();
            let rhs = p.derivative().mul(&q).add(&p.mul(&q.derivative()));
            prop_assert_eq!(lhs, rhs);
        }

        /// Differentiating a nonconstant polynomial never maps to the same
        /// monomial twice from different sources without merging; canonical
        /// form keeps coefficients consistent under add/scale round trips.
        #[test]
        fn scaling_distributes_over_addition(p in arb_diffpoly(), q in arb_diffpoly()) {
            let a = rat(3, 7);
            let lhs = p.add(&q).scale(&a);
            let rhs = p.scale(&a).add(&q.scale(&a));
            prop_assert_eq!(lhs, rhs);
        }
    }
}
