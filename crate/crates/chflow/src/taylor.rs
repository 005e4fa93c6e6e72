//! Time-Taylor expansion of the solution at t = 0 and its consequences: the
//! material-derivative jets D^k u, the Taylor coefficients of the Lagrangian
//! flow, and numerical fits of the analyticity constants.
//!
//! All jets are stored normalized, entry k holding d_t^k(.)(0)/k!, so that a
//! jet is literally the coefficient list of a truncated power series in t.
//! The coefficient recursion follows the equation itself:
//!
//!   (k+1) u_{k+1} = -sum_j u_j d_x u_{k-j} - d_x P_k,
//!   P_k = A^{-1} [quadratic source, Cauchy coefficient k],
//!
//! with the source expanded exactly through the bilinear form of the
//! antiderivative polynomial. Material derivatives come from jet calculus:
//! applying D = d_t + u d_x to a normalized jet shifts-and-scales the time
//! slots and convolves with the velocity jet, shortening the jet by one.

use serde::Serialize;

use crate::diffpoly;
use crate::field::{PeriodicField, PeriodicGrid};
use crate::operators::{invert_a, LambdaSign, OperatorSpec};
use crate::real::Real;
use crate::{c, Error, Result};

/// Truncation orders above this are refused: the unnormalized material
/// derivatives grow like k! L^k and the fits lose meaning in round-off long
/// before k! itself overflows.
pub const MAX_ORDER: usize = 30;

/// Coefficient norms beyond this abort the recursion; the datum is outside
/// the series' reach at any useful radius.
const COEFF_OVERFLOW: f64 = 1e12;

/// The truncated series u(t) = sum_k coeffs[k] t^k at a fixed order l.
#[derive(Clone, Debug)]
pub struct TimeTaylor<T: Real> {
    l: usize,
    coeffs: Vec<PeriodicField<T>>,
    /// Cauchy coefficients of the quadratic source F[u] along the series,
    /// kept for the pressure-factorization routes.
    source: Vec<PeriodicField<T>>,
}

impl<T: Real> TimeTaylor<T> {
    pub fn l(&self) -> usize {
        self.l
    }

    /// Truncation order K; the jet holds K+1 coefficients.
    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn grid(&self) -> PeriodicGrid {
        self.coeffs[0].grid()
    }

    pub fn coeffs(&self) -> &[PeriodicField<T>] {
        &self.coeffs
    }

    /// Taylor coefficients of the quadratic source F[u(t)].
    pub fn source(&self) -> &[PeriodicField<T>] {
        &self.source
    }

    /// Sums the series at time t by Horner's rule.
    pub fn evaluate(&self, t: T) -> PeriodicField<T> {
        let mut acc = self.coeffs.last().expect("jet is nonempty").clone();
        for k in (0..self.coeffs.len() - 1).rev() {
            acc = acc.scale(t).add(&self.coeffs[k]);
        }
        acc
    }

    /// d/dt of the truncated series at time t.
    pub fn evaluate_dt(&self, t: T) -> PeriodicField<T> {
        let kk = self.order();
        let mut acc = self.coeffs[kk].scale(c::<T>(kk as f64));
        for k in (1..kk).rev() {
            acc = acc.scale(t).add(&self.coeffs[k].scale(c::<T>(k as f64)));
        }
        acc
    }
}

/// Builds the time-Taylor jet of the solution with datum u0 at order l,
/// truncated at k_max <= [`MAX_ORDER`].
pub fn time_taylor_u<T: Real>(
    u0: &PeriodicField<T>,
    l: usize,
    k_max: usize,
) -> Result<TimeTaylor<T>> {
    assert!(l >= 1, "the hierarchy starts at l = 1");
    assert!(k_max <= MAX_ORDER, "truncation order capped at {MAX_ORDER}");
    let f_poly = diffpoly::antiderivative_f(l)?;
    let grid = u0.grid();
    let mut coeffs = vec![u0.clone()];
    let mut source = Vec::with_capacity(k_max + 1);
    for k in 0..=k_max {
        // Cauchy coefficient k of F[u(t)]: the bilinear form already
        // symmetrizes each term, so the plain convolution is exact.
        let mut src = PeriodicField::zero(grid);
        for j in 0..=k {
            src = src.add(&f_poly.evaluate_bilinear(&coeffs[j], &coeffs[k - j]));
        }
        source.push(src);
        if k == k_max {
            break;
        }
        let mut advect = PeriodicField::zero(grid);
        for j in 0..=k {
            advect = advect.add(&coeffs[j].mul_dealiased(&coeffs[k - j].derivative(1)));
        }
        let dxp = invert_a(&source[k], l).derivative(1);
        let next = advect
            .add(&dxp)
            .scale(-T::one() / c::<T>((k + 1) as f64));
        let norm = next.sup_norm().to_f64().unwrap_or(f64::INFINITY);
        if norm > COEFF_OVERFLOW {
            return Err(Error::Invalid(format!(
                "Taylor coefficient {} has sup norm {norm:.3e}; the series diverges for this datum",
                k + 1
            )));
        }
        coeffs.push(next);
    }
    Ok(TimeTaylor { l, coeffs, source })
}

/// One application of D = d_t + u d_x in jet form. Entry j of the result is
/// (j+1) a_{j+1} + sum_{i<=j} u_i (a_{j-i})'; the jet shortens by one slot.
fn material_d<T: Real>(
    jet: &[PeriodicField<T>],
    u_jet: &[PeriodicField<T>],
) -> Vec<PeriodicField<T>> {
    (0..jet.len() - 1)
        .map(|j| {
            let mut out = jet[j + 1].scale(c::<T>((j + 1) as f64));
            for i in 0..=j {
                out = out.add(&u_jet[i].mul_dealiased(&jet[j - i].derivative(1)));
            }
            out
        })
        .collect()
}

/// D^k u(0,·) for k = 0..=k_max, unnormalized. Each step consumes one jet
/// slot, so k_max cannot exceed the truncation order.
pub fn material_derivatives<T: Real>(tt: &TimeTaylor<T>, k_max: usize) -> Vec<PeriodicField<T>> {
    assert!(
        k_max <= tt.order(),
        "jets of order {} support material derivatives only up to k = {}",
        tt.order(),
        tt.order()
    );
    let mut out = Vec::with_capacity(k_max + 1);
    let mut jet = tt.coeffs.clone();
    out.push(jet[0].clone());
    for _ in 0..k_max {
        jet = material_d(&jet, &tt.coeffs);
        out.push(jet[0].clone());
    }
    out
}

/// Taylor coefficients of the flow: entry k is xi_{k+1} = D^k u(0,·)/(k+1)!,
/// the coefficient of t^{k+1} in xi(t,x) - x.
pub fn flow_coefficients<T: Real>(tt: &TimeTaylor<T>) -> Vec<PeriodicField<T>> {
    let mut inv_fact = T::one();
    material_derivatives(tt, tt.order())
        .into_iter()
        .enumerate()
        .map(|(k, d)| {
            inv_fact = inv_fact / c::<T>((k + 1) as f64);
            d.scale(inv_fact)
        })
        .collect()
}

/// Convenience wrapper: series coefficients of the flow for a given datum.
pub fn flow_taylor<T: Real>(
    u0: &PeriodicField<T>,
    l: usize,
    k_max: usize,
) -> Result<Vec<PeriodicField<T>>> {
    Ok(flow_coefficients(&time_taylor_u(u0, l, k_max)?))
}

/// Jets of Lambda_+- P = Lambda~_+-^{-1} F[u] along the series, split into
/// real and imaginary parts (D has real coefficients, so the split commutes
/// with jet calculus).
pub struct PressureJet<T: Real> {
    pub re: Vec<PeriodicField<T>>,
    pub im: Vec<PeriodicField<T>>,
}

pub fn lambda_pressure_jets<T: Real>(
    tt: &TimeTaylor<T>,
) -> Result<(PressureJet<T>, PressureJet<T>)> {
    let spec = OperatorSpec::<T>::new(tt.l)?;
    let grid = tt.grid();
    let mut jets = [
        PressureJet { re: Vec::new(), im: Vec::new() },
        PressureJet { re: Vec::new(), im: Vec::new() },
    ];
    for src in &tt.source {
        let f = src.to_complex();
        for (slot, sign) in [LambdaSign::Plus, LambdaSign::Minus].into_iter().enumerate() {
            let w = spec.solve_lambda_tilde(&f, sign);
            jets[slot]
                .re
                .push(PeriodicField::from_values(grid, w.values().iter().map(|z| z.re).collect()));
            jets[slot]
                .im
                .push(PeriodicField::from_values(grid, w.values().iter().map(|z| z.im).collect()));
        }
    }
    let [plus, minus] = jets;
    Ok((plus, minus))
}

/// Numerical witnesses of the analyticity estimates at t = 0. All norms are
/// reported in f64 regardless of the working precision.
#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct AnalyticityReport {
    pub l: usize,
    pub k_max: usize,
    /// ||u0||_{W^{2l-1,inf}}, the series' amplitude scale.
    pub v: f64,
    /// sup_table[m][k] = ||d_x^m D^k u(0)||_inf for m <= 2l-1, k <= K.
    pub sup_table: Vec<Vec<f64>>,
    /// The k = 0 jet bounds, which involve no constant to fit.
    pub base_case_holds: bool,
    /// l_fit[k]: smallest L making the jet bound
    /// ||d_x^m D^j u|| <= 4 m!j!/((m+1)^2(j+1)^2) L^j V^(j+1)
    /// hold for all m <= 2l-1 and 1 <= j <= k. Nondecreasing in k.
    pub l_fit: Vec<f64>,
    pub l_sup: f64,
    /// Whether l_fit has flattened: its value at K within twice its value
    /// at k = 5. Vacuously true below K = 5.
    pub stabilizes: bool,
    /// Separate fit for the pressure bound
    /// ||d_x^m D^k Lambda_+- P|| <= L V * m!k!/((m+1)^2(k+1)^2) L^k V^(k+1).
    pub lambda_l_fit: f64,
    /// Smallest L with ||xi_{k+1}||_W <= L^k V^(k+1)/(k+1)^2 for 1 <= k <= K.
    pub flow_l_fit: f64,
    /// The same flow bound evaluated with l_sup, the jet-side fit.
    pub flow_bound_holds_with_jet_l: bool,
    /// 1 / max(||xi_{k+1}||_W / ||xi_k||_W) over the upper half of the range;
    /// None when the coefficients vanish identically.
    pub radius_estimate: Option<f64>,
    /// Set above K = 20, where round-off dominates the smallest coefficients.
    pub roundoff_warning: bool,
}

fn factorial_f64(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, j| acc * j as f64)
}

fn sup_f64<T: Real>(f: &PeriodicField<T>) -> f64 {
    f.sup_norm().to_f64().unwrap_or(f64::NAN)
}

pub fn analyticity_report<T: Real>(tt: &TimeTaylor<T>) -> Result<AnalyticityReport> {
    let l = tt.l;
    let kk = tt.order();
    let m_max = 2 * l - 1;
    let v = tt.coeffs[0].w_inf_norm(m_max).to_f64().unwrap_or(f64::NAN);
    let roundoff_warning = kk > 20;

    if v == 0.0 {
        // Zero datum: every bound holds with any L; report the trivial fit.
        return Ok(AnalyticityReport {
            l,
            k_max: kk,
            v,
            sup_table: vec![vec![0.0; kk + 1]; m_max + 1],
            base_case_holds: true,
            l_fit: vec![0.0; kk + 1],
            l_sup: 0.0,
            stabilizes: true,
            lambda_l_fit: 0.0,
            flow_l_fit: 0.0,
            flow_bound_holds_with_jet_l: true,
            radius_estimate: None,
            roundoff_warning,
        });
    }

    let derivs = material_derivatives(tt, kk);
    let mut sup_table = vec![vec![0.0; kk + 1]; m_max + 1];
    for (k, d) in derivs.iter().enumerate() {
        for (m, row) in sup_table.iter_mut().enumerate() {
            row[k] = if m == 0 { sup_f64(d) } else { sup_f64(&d.derivative(m)) };
        }
    }

    // Slack for bounds that the data saturates exactly (e.g. m = 1, j = 0 at
    // l = 1, where the bound reduces to ||u0'|| <= V with equality).
    let slack = 1.0 + 1e-9;

    let base_case_holds = (0..=m_max).all(|m| {
        sup_table[m][0] <= 4.0 * factorial_f64(m) / ((m + 1) * (m + 1)) as f64 * v * slack
    });

    // Smallest L for the (m, j) jet bound, j >= 1.
    let jet_l_req = |m: usize, j: usize| -> f64 {
        let bound_unit = 4.0 * factorial_f64(m) * factorial_f64(j)
            / (((m + 1) * (m + 1) * (j + 1) * (j + 1)) as f64)
            * v.powi(j as i32 + 1);
        (sup_table[m][j] / bound_unit).powf(1.0 / j as f64)
    };
    let mut l_fit = vec![0.0f64; kk + 1];
    for k in 1..=kk {
        let mut worst = l_fit[k - 1];
        for m in 0..=m_max {
            worst = worst.max(jet_l_req(m, k));
        }
        l_fit[k] = worst;
    }
    let l_sup = l_fit[kk];
    let stabilizes = kk < 5 || l_sup <= 2.0 * l_fit[5];

    // Pressure-side fit: each (m, k) pins L via L^(k+1) >= ratio.
    let (plus, minus) = lambda_pressure_jets(tt)?;
    let mut lambda_l_fit = 0.0f64;
    for jet in [&plus, &minus] {
        let mut re = jet.re.clone();
        let mut im = jet.im.clone();
        for k in 0..=kk {
            for m in 0..=m_max {
                let dre = if m == 0 { re[0].clone() } else { re[0].derivative(m) };
                let dim = if m == 0 { im[0].clone() } else { im[0].derivative(m) };
                let norm = dre
                    .values()
                    .iter()
                    .zip(dim.values())
                    .fold(0.0f64, |acc, (&a, &b)| {
                        let a = a.to_f64().unwrap_or(f64::NAN);
                        let b = b.to_f64().unwrap_or(f64::NAN);
                        acc.max((a * a + b * b).sqrt())
                    });
                let bound_unit = factorial_f64(m) * factorial_f64(k)
                    / (((m + 1) * (m + 1) * (k + 1) * (k + 1)) as f64)
                    * v.powi(k as i32 + 2);
                lambda_l_fit = lambda_l_fit.max((norm / bound_unit).powf(1.0 / (k + 1) as f64));
            }
            if k < kk {
                re = material_d(&re, &tt.coeffs);
                im = material_d(&im, &tt.coeffs);
            }
        }
    }

    // Flow side: normalized coefficients against L^k V^(k+1)/(k+1)^2.
    let flow = flow_coefficients(tt);
    let flow_norm: Vec<f64> = flow
        .iter()
        .map(|f| f.w_inf_norm(m_max).to_f64().unwrap_or(f64::NAN))
        .collect();
    let mut flow_l_fit = 0.0f64;
    for (k, &norm) in flow_norm.iter().enumerate().skip(1) {
        let unit = v.powi(k as i32 + 1) / (((k + 1) * (k + 1)) as f64);
        flow_l_fit = flow_l_fit.max((norm / unit).powf(1.0 / k as f64));
    }
    let flow_bound_holds_with_jet_l = flow_norm.iter().enumerate().all(|(k, &norm)| {
        norm <= l_sup.powi(k as i32) * v.powi(k as i32 + 1) / (((k + 1) * (k + 1)) as f64) * slack
    });

    // Ratio test over the upper half of the coefficient range.
    let mut worst_ratio = 0.0f64;
    let floor = 1e-280;
    for k in (kk / 2).max(1)..flow_norm.len() {
        if flow_norm[k - 1] > floor {
            worst_ratio = worst_ratio.max(flow_norm[k] / flow_norm[k - 1]);
        }
    }
    let radius_estimate = if worst_ratio > 0.0 { Some(1.0 / worst_ratio) } else { None };

    Ok(AnalyticityReport {
        l,
        k_max: kk,
        v,
        sup_table,
        base_case_holds,
        l_fit,
        l_sup,
        stabilizes,
        lambda_l_fit,
        flow_l_fit,
        flow_bound_holds_with_jet_l,
        radius_estimate,
        roundoff_warning,
    })
}
