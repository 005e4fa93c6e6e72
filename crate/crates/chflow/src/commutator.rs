//! Exact calculus for the commutator of powers of the material derivative
//! D = d_t + u d_x with spatial derivatives.
//!
//! The object of interest is the differential polynomial F[k,m] in
//!
//!   d_x^m D^k psi = D^k d_x^m psi + F[k,m][u, psi],
//!
//! built constructively: the m = 1 base comes from iterating the operator
//! identity d_x D = D d_x + (d_x u) d_x, and the step m-1 -> m splits into
//! three kinds of emissions (raise the psi factor, substitute the inner
//! commutator, differentiate the previous set). Terms are kept unmerged, as
//! emitted; merging happens only in the aggregation views used for bound
//! checks.
//!
//! Each term is a product
//!
//!   prod_{i<s} d_x^{beta_i} D^{alpha_i} u  *  d_x^{beta_s} D^{alpha_s} psi
//!
//! indexed by gamma = (s, alpha, beta) with |alpha| = k+1-s, |beta| = m+s-1,
//! every beta_i >= 1, and 2 <= s <= k+1.
//!
//! The unmerged emission count grows roughly like s^m per step, so the large
//! (k, m) bound checks run on `aggregate_fkm`, a recursion over merged
//! (net, sum-of-absolute) coefficient tables that is exactly equivalent:
//! all three emission kinds act slot-wise on gamma and multiply coefficients,
//! so they commute with grouping by gamma.

pub mod symfield;

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;

use symfield::SymField;

use crate::{Error, Result};

/// Index of one product term: u-slots first, psi slot last. Each slot is
/// (alpha, beta) for the factor d_x^beta D^alpha. Slots are ordered tuples:
/// the index set treats alpha and beta as vectors, and the coefficient bounds
/// are stated per ordered tuple, so permutations of the u slots are distinct
/// indices even though they name the same product.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Gamma {
    /// (alpha, beta) per u factor, in emission order.
    pub u_slots: Vec<(u32, u32)>,
    /// (alpha, beta) of the psi factor.
    pub psi_slot: (u32, u32),
}

impl Gamma {
    pub fn s(&self) -> usize {
        self.u_slots.len() + 1
    }

    pub fn alpha_sum(&self) -> u32 {
        self.u_slots.iter().map(|&(a, _)| a).sum::<u32>() + self.psi_slot.0
    }

    pub fn beta_sum(&self) -> u32 {
        self.u_slots.iter().map(|&(_, b)| b).sum::<u32>() + self.psi_slot.1
    }

    /// Membership in the index set for the pair (k, m).
    pub fn is_member_of(&self, k: u32, m: u32) -> bool {
        let s = self.s() as u32;
        s >= 2
            && s <= k + 1
            && self.alpha_sum() == k + 1 - s
            && self.beta_sum() == m + s - 1
            && self.u_slots.iter().all(|&(_, b)| b >= 1)
            && self.psi_slot.1 >= 1
    }

    fn alpha_factorial(&self) -> BigInt {
        let mut f = factorial(self.psi_slot.0);
        for &(a, _) in &self.u_slots {
            f *= factorial(a);
        }
        f
    }

    fn beta_factorial(&self) -> BigInt {
        let mut f = factorial(self.psi_slot.1);
        for &(_, b) in &self.u_slots {
            f *= factorial(b);
        }
        f
    }
}

fn write_factor(f: &mut fmt::Formatter<'_>, a: u32, b: u32, name: &str) -> fmt::Result {
    if b == 1 {
        write!(f, "dx")?;
    } else {
        write!(f, "dx^{b}")?;
    }
    if a == 1 {
        write!(f, " D")?;
    } else if a > 1 {
        write!(f, " D^{a}")?;
    }
    write!(f, " {name}")
}

impl fmt::Display for Gamma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &(a, b) in &self.u_slots {
            write_factor(f, a, b, "u")?;
            write!(f, " ")?;
        }
        write_factor(f, self.psi_slot.0, self.psi_slot.1, "psi")
    }
}

fn factorial(n: u32) -> BigInt {
    (1..=n as u64).map(BigInt::from).fold(BigInt::one(), |a, b| a * b)
}

fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u64 = 1;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// The commutator expansion for one (k, m): an ordered, unmerged list of
/// (gamma, integer coefficient) emissions, exactly as the recursion produced
/// them.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TermSet {
    pub k: u32,
    pub m: u32,
    terms: Vec<(Gamma, i64)>,
}

impl TermSet {
    pub fn terms(&self) -> &[(Gamma, i64)] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Net coefficient per gamma (signed sum over duplicate emissions).
    pub fn aggregated(&self) -> BTreeMap<Gamma, i64> {
        let mut out: BTreeMap<Gamma, i64> = BTreeMap::new();
        for (g, c) in &self.terms {
            *out.entry(g.clone()).or_insert(0) += c;
        }
        out.retain(|_, c| *c != 0);
        out
    }

    /// Sum of |coefficient| per gamma; the quantity the bounds are checked on.
    pub fn abs_aggregated(&self) -> BTreeMap<Gamma, i64> {
        let mut out: BTreeMap<Gamma, i64> = BTreeMap::new();
        for (g, c) in &self.terms {
            *out.entry(g.clone()).or_insert(0) += c.abs();
        }
        out
    }

    /// Every emission must carry an index inside the (k, m) set.
    pub fn validate(&self) -> Result<()> {
        for (g, _) in &self.terms {
            if !g.is_member_of(self.k, self.m) {
                return Err(Error::Invalid(format!(
                    "term {g} escapes the index set for k={}, m={}",
                    self.k, self.m
                )));
            }
        }
        Ok(())
    }

    /// Deterministic dump of the aggregated view, suitable for golden files.
    pub fn dump(&self) -> String {
        let agg = self.aggregated();
        let mut out = format!(
            "F[k={},m={}] emissions={} distinct={}\n",
            self.k,
            self.m,
            self.terms.len(),
            agg.len()
        );
        for (g, c) in &agg {
            out.push_str(&format!("  {c:+} {g}\n"));
        }
        out
    }
}

/// Internal builder representation: factor lists plus coefficient.
#[derive(Clone, Debug)]
struct RawTerm {
    u: Vec<(u32, u32)>,
    psi: (u32, u32),
    coeff: i64,
}

impl RawTerm {
    fn gamma(&self) -> Gamma {
        Gamma {
            u_slots: self.u.clone(),
            psi_slot: self.psi,
        }
    }
}

fn to_term_set(k: u32, m: u32, raw: Vec<RawTerm>) -> TermSet {
    let terms = raw.into_iter().map(|t| (t.gamma(), t.coeff)).collect();
    let set = TermSet { k, m, terms };
    debug_assert!(set.validate().is_ok());
    set
}

/// The m = 1 base in raw form. F[1] = (d_x u)(d_x psi);
/// F[k] = "D applied to F[k-1]" + (d_x u)(d_x D^(k-1) psi), where D acts as a
/// derivation and on a single factor satisfies
/// D(d_x D^a v) = d_x D^(a+1) v - (d_x u)(d_x D^a v).
fn build_f1_raw(k: u32) -> Vec<RawTerm> {
    let mut raw = vec![RawTerm {
        u: vec![(0, 1)],
        psi: (0, 1),
        coeff: 1,
    }];
    for kk in 2..=k {
        let mut next: Vec<RawTerm> = Vec::new();
        for t in &raw {
            // All factors here have beta = 1, so the rewrite applies directly.
            for i in 0..t.u.len() {
                let mut bumped = t.clone();
                bumped.u[i].0 += 1;
                next.push(bumped);
                let mut extra = t.clone();
                extra.u.push((0, 1));
                extra.coeff = -extra.coeff;
                next.push(extra);
            }
            let mut bumped = t.clone();
            bumped.psi.0 += 1;
            next.push(bumped);
            let mut extra = t.clone();
            extra.u.push((0, 1));
            extra.coeff = -extra.coeff;
            next.push(extra);
        }
        next.push(RawTerm {
            u: vec![(0, 1)],
            psi: (kk - 1, 1),
            coeff: 1,
        });
        raw = next;
    }
    raw
}

/// Base expansion (m = 1): d_x D^k psi = D^k d_x psi + F[k].
pub fn build_f1(k: u32) -> TermSet {
    assert!(k >= 1, "the base expansion starts at k = 1");
    to_term_set(k, 1, build_f1_raw(k))
}

/// Full expansion for any (k, m), via the three-kind step from m-1 to m:
///  1. the base expansion applied to d_x^(m-1) psi, its psi factor
///     renormalized from d_x D^a d_x^(m-1) psi to d_x^m D^a psi;
///  2. minus the base coefficient times d_x of the inner expansion F[a, m-1]
///     (the renormalization remainder), for psi slots with a >= 1,
///     multiplied by the surviving u factors;
///  3. d_x of F[k, m-1] by the Leibniz rule, one emission per factor.
///
/// Emission counts grow quickly; for bound checks at large (k, m) prefer
/// `aggregate_fkm`.
pub fn build_fkm(k: u32, m: u32) -> TermSet {
    assert!(k >= 1 && m >= 1);
    let mut memo: HashMap<(u32, u32), Vec<RawTerm>> = HashMap::new();
    let raw = build_fkm_raw(k, m, &mut memo);
    to_term_set(k, m, raw)
}

fn build_fkm_raw(
    k: u32,
    m: u32,
    memo: &mut HashMap<(u32, u32), Vec<RawTerm>>,
) -> Vec<RawTerm> {
    if let Some(hit) = memo.get(&(k, m)) {
        return hit.clone();
    }
    let result = if m == 1 {
        build_f1_raw(k)
    } else {
        let mut out: Vec<RawTerm> = Vec::new();
        // Kinds 1 and 2 come from the base expansion applied to d_x^(m-1) psi.
        let base = build_fkm_raw(k, 1, memo);
        for t in &base {
            let (a, b) = t.psi;
            debug_assert_eq!(b, 1);
            out.push(RawTerm {
                u: t.u.clone(),
                psi: (a, m),
                coeff: t.coeff,
            });
            if a >= 1 {
                let inner = build_fkm_raw(a, m - 1, memo);
                for it in &inner {
                    for j in 0..it.u.len() {
                        let mut merged = it.clone();
                        merged.u[j].1 += 1;
                        merged.u.extend_from_slice(&t.u);
                        merged.coeff = -t.coeff * it.coeff;
                        out.push(merged);
                    }
                    let mut merged = it.clone();
                    merged.psi.1 += 1;
                    merged.u.extend_from_slice(&t.u);
                    merged.coeff = -t.coeff * it.coeff;
                    out.push(merged);
                }
            }
        }
        // Kind 3: d_x of the previous set.
        let prev = build_fkm_raw(k, m - 1, memo);
        for t in &prev {
            for i in 0..t.u.len() {
                let mut bumped = t.clone();
                bumped.u[i].1 += 1;
                out.push(bumped);
            }
            let mut bumped = t.clone();
            bumped.psi.1 += 1;
            out.push(bumped);
        }
        out
    };
    memo.insert((k, m), result.clone());
    result
}

/// Merged coefficient table: gamma -> (net signed sum, sum of absolute
/// values) over all duplicate emissions.
pub type AggTable = BTreeMap<Gamma, (i64, i64)>;

fn agg_add(table: &mut AggTable, g: Gamma, net: i64, abs: i64) {
    let slot = table.entry(g).or_insert((0, 0));
    slot.0 += net;
    slot.1 += abs;
}

/// Same expansion as `build_fkm`, computed directly on merged tables.
/// Equivalent because each emission kind acts factor-wise on gamma and
/// multiplies coefficients, so it commutes with grouping; the absolute
/// column stays exact since |c * c'| = |c| |c'|.
pub fn aggregate_fkm(k: u32, m: u32) -> AggTable {
    assert!(k >= 1 && m >= 1);
    let mut memo: HashMap<(u32, u32), AggTable> = HashMap::new();
    aggregate_fkm_memo(k, m, &mut memo)
}

fn aggregate_fkm_memo(
    k: u32,
    m: u32,
    memo: &mut HashMap<(u32, u32), AggTable>,
) -> AggTable {
    if let Some(hit) = memo.get(&(k, m)) {
        return hit.clone();
    }
    let result: AggTable = if m == 1 {
        let mut table = AggTable::new();
        for t in build_f1_raw(k) {
            agg_add(&mut table, t.gamma(), t.coeff, t.coeff.abs());
        }
        table
    } else {
        let mut out = AggTable::new();
        let base = aggregate_fkm_memo(k, 1, memo);
        for (theta, &(net_t, abs_t)) in &base {
            let (a, b) = theta.psi_slot;
            debug_assert_eq!(b, 1);
            let mut kind1 = theta.clone();
            kind1.psi_slot = (a, m);
            agg_add(&mut out, kind1, net_t, abs_t);
            if a >= 1 {
                let inner = aggregate_fkm_memo(a, m - 1, memo);
                for (g, &(net_i, abs_i)) in &inner {
                    let attach = |mut child: Gamma| {
                        child.u_slots.extend_from_slice(&theta.u_slots);
                        child
                    };
                    for j in 0..g.u_slots.len() {
                        let mut child = g.clone();
                        child.u_slots[j].1 += 1;
                        agg_add(&mut out, attach(child), -net_t * net_i, abs_t * abs_i);
                    }
                    let mut child = g.clone();
                    child.psi_slot.1 += 1;
                    agg_add(&mut out, attach(child), -net_t * net_i, abs_t * abs_i);
                }
            }
        }
        let prev = aggregate_fkm_memo(k, m - 1, memo);
        for (g, &(net, abs)) in &prev {
            for j in 0..g.u_slots.len() {
                let mut child = g.clone();
                child.u_slots[j].1 += 1;
                agg_add(&mut out, child, net, abs);
            }
            let mut child = g.clone();
            child.psi_slot.1 += 1;
            agg_add(&mut out, child, net, abs);
        }
        out
    };
    memo.insert((k, m), result.clone());
    result
}

/// Brute-force enumeration of the full index set for (k, m): all
/// gamma = (s, alpha, beta) with the membership constraints, alpha and beta
/// as ordered tuples over the u slots plus the psi slot.
pub fn enumerate_bkm(k: u32, m: u32) -> Vec<Gamma> {
    let mut out = Vec::new();
    for s in 2..=(k + 1) {
        let asum = k + 1 - s;
        let bsum = m + s - 1;
        let alphas = compositions(asum, s, 0);
        let betas = compositions(bsum, s, 1);
        for alpha in &alphas {
            for beta in &betas {
                let u_slots: Vec<(u32, u32)> = alpha[..(s - 1) as usize]
                    .iter()
                    .zip(&beta[..(s - 1) as usize])
                    .map(|(&a, &b)| (a, b))
                    .collect();
                out.push(Gamma {
                    u_slots,
                    psi_slot: (alpha[(s - 1) as usize], beta[(s - 1) as usize]),
                });
            }
        }
    }
    out
}

/// All ordered tuples of `parts` integers >= floor summing to total.
fn compositions(total: u32, parts: u32, floor: u32) -> Vec<Vec<u32>> {
    fn rec(total: u32, parts: u32, floor: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if parts == 1 {
            if total >= floor {
                prefix.push(total);
                out.push(prefix.clone());
                prefix.pop();
            }
            return;
        }
        let mut v = floor;
        while v + floor * (parts - 1) <= total {
            prefix.push(v);
            rec(total - v, parts - 1, floor, prefix, out);
            prefix.pop();
            v += 1;
        }
    }
    let mut out = Vec::new();
    if parts >= 1 {
        rec(total, parts, floor, &mut Vec::new(), &mut out);
    }
    out
}

/// Count of the index set without materializing it.
pub fn bkm_size(k: u32, m: u32) -> u64 {
    (2..=(k + 1) as u64)
        .map(|s| binomial(k as u64, s - 1) * binomial(m as u64 + s - 2, s - 1))
        .sum()
}

/// One bound violation. The checkers return these instead of panicking so
/// callers can decide whether a violation is fatal.
#[derive(Clone, Debug)]
pub struct BoundViolation {
    pub gamma: Gamma,
    pub aggregate: i64,
    pub bound: BigRational,
}

/// Base-case coefficient bound: the sum of |c| over duplicate gamma emissions
/// of the m = 1 expansion must not exceed k!/alpha!.
pub fn check_base_bound(k: u32) -> Vec<BoundViolation> {
    let set = build_f1(k);
    let kfact = factorial(k);
    let mut violations = Vec::new();
    for (g, agg) in set.abs_aggregated() {
        let bound = BigRational::new(kfact.clone(), g.alpha_factorial());
        if BigRational::from(BigInt::from(agg)) > bound {
            violations.push(BoundViolation {
                gamma: g,
                aggregate: agg,
                bound,
            });
        }
    }
    violations
}

/// General coefficient bound: the sum of |c| over duplicate gamma emissions
/// of F[k, m] must not exceed (2s)^(2(m-1)) k! m! / (alpha! beta!).
pub fn check_general_bound(k: u32, m: u32) -> Vec<BoundViolation> {
    let table = aggregate_fkm(k, m);
    let kfact = factorial(k);
    let mfact = factorial(m);
    let mut violations = Vec::new();
    for (g, (_, abs)) in table {
        let two_s = BigInt::from(2 * g.s() as u64);
        let growth = two_s.pow(2 * (m - 1));
        let bound = BigRational::new(
            growth * &kfact * &mfact,
            g.alpha_factorial() * g.beta_factorial(),
        );
        if BigRational::from(BigInt::from(abs)) > bound {
            violations.push(BoundViolation {
                gamma: g,
                aggregate: abs,
                bound,
            });
        }
    }
    violations
}

/// Evaluates both sides of the defining identity on exact symbolic fields and
/// returns the largest residual coefficient (0 exactly when it holds).
pub fn verify_identity(k: u32, m: u32, u: &SymField, psi: &SymField) -> f64 {
    let table = aggregate_fkm(k, m);

    let d = |f: &SymField| f.dt().add(&u.mul(&f.dx()));
    let dxn = |f: &SymField, n: u32| {
        let mut g = f.clone();
        for _ in 0..n {
            g = g.dx();
        }
        g
    };

    // Left side: d_x^m D^k psi.
    let mut dk_psi = psi.clone();
    for _ in 0..k {
        dk_psi = d(&dk_psi);
    }
    let lhs = dxn(&dk_psi, m);

    // Right side: D^k d_x^m psi + F[k,m].
    let mut rhs = dxn(psi, m);
    for _ in 0..k {
        rhs = d(&rhs);
    }

    // Factor cache: (alpha, beta, is_u) -> d_x^beta D^alpha (u or psi).
    let mut cache: HashMap<(u32, u32, bool), SymField> = HashMap::new();
    let factor = |a: u32, b: u32, is_u: bool, cache: &mut HashMap<(u32, u32, bool), SymField>| {
        if let Some(hit) = cache.get(&(a, b, is_u)) {
            return hit.clone();
        }
        let mut f = if is_u { u.clone() } else { psi.clone() };
        for _ in 0..a {
            f = d(&f);
        }
        f = dxn(&f, b);
        cache.insert((a, b, is_u), f.clone());
        f
    };

    for (g, (net, _)) in table {
        if net == 0 {
            continue;
        }
        let mut prod = factor(g.psi_slot.0, g.psi_slot.1, false, &mut cache);
        for &(a, b) in &g.u_slots {
            prod = prod.mul(&factor(a, b, true, &mut cache));
        }
        rhs = rhs.add(&prod.scale_int(net));
    }

    lhs.sub(&rhs).max_abs_f64()
}

/// Result of the product-of-inverse-squares sum against its closed bound.
#[derive(Clone, Debug)]
pub struct UpsilonCheck {
    pub sum: BigRational,
    pub bound: BigRational,
    pub holds: bool,
}

/// Exact sum over all alpha in N^s with |alpha| = m of prod_i 1/(1+alpha_i)^2,
/// compared against 20^s/(m+1)^2. Refuses index sets beyond 10^7 tuples.
pub fn upsilon_sum(s: u32, m: u32) -> Result<UpsilonCheck> {
    assert!(s >= 1);
    let tuples = binomial((m + s - 1) as u64, (s - 1) as u64);
    const LIMIT: u64 = 10_000_000;
    if tuples > LIMIT {
        return Err(Error::EnumerationTooLarge {
            terms: tuples as u128,
            limit: LIMIT as u128,
        });
    }
    // Slot-by-slot convolution; identical to summing the tuples one by one.
    let inv_sq = |j: u32| {
        BigRational::new(
            BigInt::one(),
            BigInt::from((j as u64 + 1) * (j as u64 + 1)),
        )
    };
    let mut row: Vec<BigRational> = (0..=m).map(inv_sq).collect();
    for _ in 1..s {
        let mut next = vec![BigRational::from(BigInt::from(0)); (m + 1) as usize];
        for (total, slot) in next.iter_mut().enumerate() {
            for j in 0..=total {
                *slot += &row[total - j] * inv_sq(j as u32);
            }
        }
        row = next;
    }
    let sum = row[m as usize].clone();
    let bound = BigRational::new(
        BigInt::from(20u64).pow(s),
        BigInt::from((m as u64 + 1) * (m as u64 + 1)),
    );
    Ok(UpsilonCheck {
        holds: sum <= bound,
        sum,
        bound,
    })
}

/// Reduced Leibniz estimate: exact check of
///   k! (m1! m2! / ((m1+1)^2 (m2+1)^2)) sum_j 1/((j+1)^2 (k-j+1)^2)
///     <= 16 k! (m1+m2)! / (m1+m2+1)^2.
pub fn leibniz_bound_check(k: u32, m1: u32, m2: u32) -> bool {
    let sq = |n: u64| BigInt::from(n * n);
    let mut split = BigRational::from(BigInt::from(0));
    for j in 0..=k as u64 {
        split += BigRational::new(BigInt::one(), sq(j + 1) * sq(k as u64 - j + 1));
    }
    let lhs = BigRational::from(factorial(k))
        * BigRational::new(
            factorial(m1) * factorial(m2),
            sq(m1 as u64 + 1) * sq(m2 as u64 + 1),
        )
        * split;
    let rhs = BigRational::new(
        BigInt::from(16) * factorial(k) * factorial(m1 + m2),
        sq((m1 + m2) as u64 + 1),
    );
    lhs <= rhs
}
