//! Exact bivariate symbolic fields: polynomials in t whose coefficients are
//! trigonometric polynomials in x.
//!
//! Every x-derivative of cos(2*pi*w*x) brings down a factor 2*pi*w, so scalar
//! coefficients live in Q[tau] with tau standing for 2*pi. The representation
//! is closed under d/dt, d/dx, and multiplication, and equality to zero is
//! decidable, which is what makes residuals of operator identities exact.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};

/// Polynomial in the formal symbol tau (= 2*pi), dense coefficient vector,
/// no trailing zeros.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct TauPoly(Vec<BigRational>);

impl TauPoly {
    pub fn zero() -> Self {
        TauPoly(Vec::new())
    }

    pub fn constant(r: BigRational) -> Self {
        if r.is_zero() {
            TauPoly::zero()
        } else {
            TauPoly(vec![r])
        }
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    fn trim(&mut self) {
        while self.0.last().map_or(false, Zero::is_zero) {
            self.0.pop();
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = vec![BigRational::zero(); self.0.len().max(other.0.len())];
        for (i, c) in self.0.iter().enumerate() {
            out[i] += c;
        }
        for (i, c) in other.0.iter().enumerate() {
            out[i] += c;
        }
        let mut p = TauPoly(out);
        p.trim();
        p
    }

    pub fn neg(&self) -> Self {
        TauPoly(self.0.iter().map(|c| -c).collect())
    }

    pub fn scale(&self, a: &BigRational) -> Self {
        if a.is_zero() {
            return TauPoly::zero();
        }
        TauPoly(self.0.iter().map(|c| c * a).collect())
    }

    /// Multiply by a*tau (the x-derivative weight for mode w uses a = ±w).
    pub fn mul_tau(&self, a: &BigRational) -> Self {
        if a.is_zero() || self.is_zero() {
            return TauPoly::zero();
        }
        let mut out = vec![BigRational::zero()];
        out.extend(self.0.iter().map(|c| c * a));
        TauPoly(out)
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return TauPoly::zero();
        }
        let mut out = vec![BigRational::zero(); self.0.len() + other.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in other.0.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        let mut p = TauPoly(out);
        p.trim();
        p
    }

    pub fn max_abs_f64(&self) -> f64 {
        self.0
            .iter()
            .map(|c| c.abs().to_f64().unwrap_or(f64::INFINITY))
            .fold(0.0, f64::max)
    }
}

impl fmt::Display for TauPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (i, c) in self.0.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            match i {
                0 => write!(f, "{c}")?,
                1 => write!(f, "{c} tau")?,
                _ => write!(f, "{c} tau^{i}")?,
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Wave {
    Cos,
    Sin,
}

/// Trig polynomial in x: map from (mode, cos|sin) to a TauPoly amplitude.
/// The pair (0, Sin) is identically zero and never stored.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct TrigPoly {
    terms: BTreeMap<(u32, Wave), TauPoly>,
}

impl TrigPoly {
    pub fn zero() -> Self {
        TrigPoly::default()
    }

    pub fn constant(r: BigRational) -> Self {
        let mut p = TrigPoly::zero();
        p.add_term(0, Wave::Cos, TauPoly::constant(r));
        p
    }

    pub fn wave(w: u32, kind: Wave, amp: BigRational) -> Self {
        let mut p = TrigPoly::zero();
        p.add_term(w, kind, TauPoly::constant(amp));
        p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    fn add_term(&mut self, w: u32, kind: Wave, amp: TauPoly) {
        if amp.is_zero() || (w == 0 && kind == Wave::Sin) {
            return;
        }
        let entry = self.terms.entry((w, kind)).or_insert_with(TauPoly::zero);
        *entry = entry.add(&amp);
        if entry.is_zero() {
            self.terms.remove(&(w, kind));
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (&(w, kind), amp) in &other.terms {
            out.add_term(w, kind, amp.clone());
        }
        out
    }

    pub fn neg(&self) -> Self {
        TrigPoly {
            terms: self.terms.iter().map(|(k, v)| (*k, v.neg())).collect(),
        }
    }

    pub fn dx(&self) -> Self {
        let mut out = TrigPoly::zero();
        for (&(w, kind), amp) in &self.terms {
            if w == 0 {
                continue;
            }
            let wr = BigRational::from(BigInt::from(w));
            match kind {
                Wave::Cos => out.add_term(w, Wave::Sin, amp.mul_tau(&-wr)),
                Wave::Sin => out.add_term(w, Wave::Cos, amp.mul_tau(&wr)),
            }
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        let half = BigRational::new(BigInt::from(1), BigInt::from(2));
        let mut out = TrigPoly::zero();
        for (&(wa, ka), pa) in &self.terms {
            for (&(wb, kb), pb) in &other.terms {
                let prod = pa.mul(pb).scale(&half);
                let sum_w = wa + wb;
                let diff_w = wa.abs_diff(wb);
                match (ka, kb) {
                    (Wave::Cos, Wave::Cos) => {
                        // cos a cos b = (cos(a-b) + cos(a+b)) / 2
                        out.add_term(diff_w, Wave::Cos, prod.clone());
                        out.add_term(sum_w, Wave::Cos, prod);
                    }
                    (Wave::Sin, Wave::Sin) => {
                        // sin a sin b = (cos(a-b) - cos(a+b)) / 2
                        out.add_term(diff_w, Wave::Cos, prod.clone());
                        out.add_term(sum_w, Wave::Cos, prod.neg());
                    }
                    (Wave::Sin, Wave::Cos) => {
                        // sin a cos b = (sin(a+b) + sin(a-b)) / 2
                        out.add_term(sum_w, Wave::Sin, prod.clone());
                        if wa >= wb {
                            out.add_term(diff_w, Wave::Sin, prod);
                        } else {
                            out.add_term(diff_w, Wave::Sin, prod.neg());
                        }
                    }
                    (Wave::Cos, Wave::Sin) => {
                        // cos a sin b = (sin(a+b) - sin(a-b)) / 2
                        out.add_term(sum_w, Wave::Sin, prod.clone());
                        if wb >= wa {
                            out.add_term(diff_w, Wave::Sin, prod);
                        } else {
                            out.add_term(diff_w, Wave::Sin, prod.neg());
                        }
                    }
                }
            }
        }
        out
    }

    pub fn max_abs_f64(&self) -> f64 {
        self.terms
            .values()
            .map(TauPoly::max_abs_f64)
            .fold(0.0, f64::max)
    }
}

/// Polynomial in t with TrigPoly coefficients; index = power of t.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct SymField {
    coeffs: Vec<TrigPoly>,
}

impl SymField {
    pub fn zero() -> Self {
        SymField::default()
    }

    pub fn constant(r: BigRational) -> Self {
        SymField {
            coeffs: vec![TrigPoly::constant(r)],
        }
        .trimmed()
    }

    /// A pure x-mode with constant-in-time rational amplitude.
    pub fn wave(w: u32, kind: Wave, amp: BigRational) -> Self {
        SymField {
            coeffs: vec![TrigPoly::wave(w, kind, amp)],
        }
        .trimmed()
    }

    pub fn from_t_coeffs(coeffs: Vec<TrigPoly>) -> Self {
        SymField { coeffs }.trimmed()
    }

    fn trimmed(mut self) -> Self {
        while self.coeffs.last().map_or(false, TrigPoly::is_zero) {
            self.coeffs.pop();
        }
        self
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let a = self.coeffs.get(i).cloned().unwrap_or_else(TrigPoly::zero);
            let b = other.coeffs.get(i).cloned().unwrap_or_else(TrigPoly::zero);
            out.push(a.add(&b));
        }
        SymField { coeffs: out }.trimmed()
    }

    pub fn neg(&self) -> Self {
        SymField {
            coeffs: self.coeffs.iter().map(TrigPoly::neg).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return SymField::zero();
        }
        let mut out = vec![TrigPoly::zero(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] = out[i + j].add(&a.mul(b));
            }
        }
        SymField { coeffs: out }.trimmed()
    }

    /// Scale by an integer without going through a full trig product.
    pub fn scale_int(&self, a: i64) -> Self {
        if a == 0 {
            return SymField::zero();
        }
        let ar = BigRational::from(BigInt::from(a));
        let coeffs = self
            .coeffs
            .iter()
            .map(|tp| {
                let mut out = TrigPoly::zero();
                for (&(w, kind), amp) in &tp.terms {
                    out.add_term(w, kind, amp.scale(&ar));
                }
                out
            })
            .collect();
        SymField { coeffs }
    }

    pub fn dt(&self) -> Self {
        if self.coeffs.len() <= 1 {
            return SymField::zero();
        }
        let mut out = Vec::with_capacity(self.coeffs.len() - 1);
        for (j, c) in self.coeffs.iter().enumerate().skip(1) {
            let jr = BigRational::from(BigInt::from(j));
            let mut scaled = TrigPoly::zero();
            for (&(w, kind), amp) in &c.terms {
                scaled.add_term(w, kind, amp.scale(&jr));
            }
            out.push(scaled);
        }
        SymField { coeffs: out }.trimmed()
    }

    pub fn dx(&self) -> Self {
        SymField {
            coeffs: self.coeffs.iter().map(TrigPoly::dx).collect(),
        }
        .trimmed()
    }

    /// Largest absolute value over all rational coefficients, as f64.
    /// Zero exactly when the field is identically zero.
    pub fn max_abs_f64(&self) -> f64 {
        self.coeffs
            .iter()
            .map(TrigPoly::max_abs_f64)
            .fold(0.0, f64::max)
    }
}
