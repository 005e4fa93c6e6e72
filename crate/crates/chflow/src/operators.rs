//! Constant-coefficient operators of the order-l hierarchy.
//!
//! `A_l = sum_{j=0}^{l} (-1)^j d_x^(2j)` factors through first-order pieces:
//! with `xi_j = exp(i*pi*j/(l+1))` and `z = -i d_x`,
//!
//! ```text
//!   Lambda_+- = z +- xi_l,
//!   Lambda~_+- = Lambda_-+ * prod_{j=1}^{l-1} (z - xi_j)(z + xi_j),
//!   A_l = Lambda_+ Lambda~_+ = Lambda_- Lambda~_-,
//! ```
//!
//! because `xi_j^2` runs over the (l+1)-th roots of unity other than 1, so the
//! full product telescopes to `(z^(2l+2) - 1)/(z^2 - 1) = sum_j z^(2j)`.
//! Everything here acts by Fourier multipliers evaluated at `z = 2*pi*k`.

use num_complex::Complex;

use crate::field::{ComplexField, PeriodicField};
use crate::real::Real;
use crate::{c, Error, Result};

/// Symbol of `A_l` at theta = 2*pi*k: `sum_{j<=l} theta^(2j)`. Always >= 1.
pub fn a_symbol<T: Real>(theta: T, l: usize) -> T {
    let t2 = theta * theta;
    let mut acc = T::one();
    let mut pow = T::one();
    for _ in 0..l {
        pow = pow * t2;
        acc = acc + pow;
    }
    acc
}

/// Applies `A_l` spectrally.
pub fn apply_a<T: Real>(f: &PeriodicField<T>, l: usize) -> PeriodicField<T> {
    let two_pi = T::TAU();
    f.apply_real_symbol(|k| Complex::new(a_symbol(two_pi * c::<T>(k as f64), l), T::zero()))
}

/// Inverts `A_l` spectrally; safe because the symbol never drops below 1.
pub fn invert_a<T: Real>(f: &PeriodicField<T>, l: usize) -> PeriodicField<T> {
    let two_pi = T::TAU();
    f.apply_real_symbol(|k| {
        Complex::new(T::one() / a_symbol(two_pi * c::<T>(k as f64), l), T::zero())
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LambdaSign {
    Plus,
    Minus,
}

/// The factorization data of `A_l`: the roots `xi_j` and the expanded
/// coefficients of the degree 2l-1 companion operators.
#[derive(Clone, Debug)]
pub struct OperatorSpec<T: Real> {
    l: usize,
    roots: Vec<Complex<T>>,
    /// z-polynomial coefficients of Lambda~_+ (index = power of z).
    tilde_plus: Vec<Complex<T>>,
    /// z-polynomial coefficients of Lambda~_-.
    tilde_minus: Vec<Complex<T>>,
}

fn poly_mul<T: Real>(a: &[Complex<T>], b: &[Complex<T>]) -> Vec<Complex<T>> {
    let mut out = vec![Complex::new(T::zero(), T::zero()); a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] = out[i + j] + x * y;
        }
    }
    out
}

fn poly_eval<T: Real>(p: &[Complex<T>], z: Complex<T>) -> Complex<T> {
    let mut acc = Complex::new(T::zero(), T::zero());
    for &coeff in p.iter().rev() {
        acc = acc * z + coeff;
    }
    acc
}

impl<T: Real> OperatorSpec<T> {
    pub fn new(l: usize) -> Result<Self> {
        if l == 0 {
            return Err(Error::Invalid("operator order l must be >= 1".into()));
        }
        let roots: Vec<Complex<T>> = (1..=l)
            .map(|j| {
                let angle = c::<T>(std::f64::consts::PI * j as f64 / (l + 1) as f64);
                Complex::from_polar(T::one(), angle)
            })
            .collect();
        let one = Complex::new(T::one(), T::zero());
        let xi_l = roots[l - 1];
        // prod_{j=1}^{l-1} (z^2 - xi_j^2)
        let mut even = vec![one];
        for root in &roots[..l - 1] {
            let sq = *root * *root;
            even = poly_mul(&even, &[-sq, Complex::new(T::zero(), T::zero()), one]);
        }
        let tilde_plus = poly_mul(&[-xi_l, one], &even);
        let tilde_minus = poly_mul(&[xi_l, one], &even);
        let spec = OperatorSpec { l, roots, tilde_plus, tilde_minus };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        let two_pi = std::f64::consts::TAU;
        for root in &self.roots {
            let r = Complex::new(
                root.re.to_f64().unwrap_or(f64::NAN),
                root.im.to_f64().unwrap_or(f64::NAN),
            );
            let nearest = (r.re / two_pi).round() * two_pi;
            if (r - Complex::new(nearest, 0.0)).norm() < 1e-9 {
                return Err(Error::ResonantDirection { xi: r, dist: 0.0 });
            }
        }
        // Expanding Lambda_+- * Lambda~_+- must reproduce A_l exactly.
        let one = Complex::new(T::one(), T::zero());
        let xi_l = self.roots[self.l - 1];
        for (tilde, lam) in [(&self.tilde_plus, [xi_l, one]), (&self.tilde_minus, [-xi_l, one])] {
            let product = poly_mul(&lam, tilde);
            for (m, &coeff) in product.iter().enumerate() {
                let expect = if m % 2 == 0 { T::one() } else { T::zero() };
                let err = (coeff - Complex::new(expect, T::zero())).norm();
                if err > c::<T>(1e-12) {
                    return Err(Error::Invalid(format!(
                        "factorization of A_{} drifted at z^{m}: residue {:?}",
                        self.l, coeff
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn order(&self) -> usize {
        self.l
    }

    /// Roots `xi_1, ..., xi_l` on the upper unit semicircle.
    pub fn roots(&self) -> &[Complex<T>] {
        &self.roots
    }

    /// Coefficients `d_m` of `Lambda~_+- = sum_m d_m d_x^m`, converted from
    /// the z-polynomial through `z^m = (-i)^m d_x^m`.
    pub fn tilde_coeffs(&self, sign: LambdaSign) -> Vec<Complex<T>> {
        let poly = match sign {
            LambdaSign::Plus => &self.tilde_plus,
            LambdaSign::Minus => &self.tilde_minus,
        };
        let minus_i = Complex::new(T::zero(), -T::one());
        let mut factor = Complex::new(T::one(), T::zero());
        poly.iter()
            .map(|&a| {
                let d = a * factor;
                factor = factor * minus_i;
                d
            })
            .collect()
    }

    /// `Lambda_+- f = -i f' +- xi_l f`.
    pub fn apply_lambda(&self, f: &ComplexField<T>, sign: LambdaSign) -> ComplexField<T> {
        let two_pi = T::TAU();
        let xi_l = self.roots[self.l - 1];
        let xi = match sign {
            LambdaSign::Plus => xi_l,
            LambdaSign::Minus => -xi_l,
        };
        f.apply_symbol(|k| Complex::new(two_pi * c::<T>(k as f64), T::zero()) + xi)
    }

    /// `Lambda~_+- f`, the degree 2l-1 companion.
    pub fn apply_lambda_tilde(&self, f: &ComplexField<T>, sign: LambdaSign) -> ComplexField<T> {
        let two_pi = T::TAU();
        let poly = match sign {
            LambdaSign::Plus => &self.tilde_plus,
            LambdaSign::Minus => &self.tilde_minus,
        };
        f.apply_symbol(|k| {
            poly_eval(poly, Complex::new(two_pi * c::<T>(k as f64), T::zero()))
        })
    }

    /// Inverts `Lambda~_+-` spectrally. Its roots are the +-xi_j, none of
    /// which is real, so no real frequency is resonant.
    pub fn solve_lambda_tilde(&self, f: &ComplexField<T>, sign: LambdaSign) -> ComplexField<T> {
        let two_pi = T::TAU();
        let poly = match sign {
            LambdaSign::Plus => &self.tilde_plus,
            LambdaSign::Minus => &self.tilde_minus,
        };
        let one = Complex::new(T::one(), T::zero());
        f.apply_symbol(|k| {
            one / poly_eval(poly, Complex::new(two_pi * c::<T>(k as f64), T::zero()))
        })
    }
}

/// Distance from xi to the lattice 2*pi*Z (in the complex plane).
fn resonance_distance(xi: Complex<f64>) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let nearest = (xi.re / two_pi).round() * two_pi;
    (xi - Complex::new(nearest, 0.0)).norm()
}

fn reject_resonant<T: Real>(xi: Complex<T>) -> Result<Complex<f64>> {
    let xi64 = Complex::new(
        xi.re.to_f64().unwrap_or(f64::NAN),
        xi.im.to_f64().unwrap_or(f64::NAN),
    );
    let dist = resonance_distance(xi64);
    if !(dist >= 1e-9) {
        return Err(Error::ResonantDirection { xi: xi64, dist });
    }
    Ok(xi64)
}

/// Solves `(-i d_x - xi) f = g` by dividing each mode by `2*pi*k - xi`.
/// Rejects xi within 1e-9 of 2*pi*Z, where the operator has a kernel.
pub fn first_order_solve<T: Real>(
    g: &ComplexField<T>,
    xi: Complex<T>,
) -> Result<ComplexField<T>> {
    reject_resonant(xi)?;
    let two_pi = T::TAU();
    Ok(g.apply_symbol(|k| {
        let denom = Complex::new(two_pi * c::<T>(k as f64), T::zero()) - xi;
        Complex::new(T::one(), T::zero()) / denom
    }))
}

/// Nodes and weights of 4-point Gauss-Legendre on [0, 1].
const GL4: [(f64, f64); 4] = [
    (0.069431844202973712, 0.17392742256872693),
    (0.33000947820757187, 0.32607257743127305),
    (0.66999052179242813, 0.32607257743127305),
    (0.930568155797026288, 0.17392742256872693),
];

/// Solves the same problem by variation of constants,
///
/// ```text
///   -i f(x) = C e^(i xi x) + e^(i xi x) * Int_0^x g(y) e^(-i xi y) dy,
///   C (1 - e^(i xi)) = e^(i xi) * Int_0^1 g(y) e^(-i xi y) dy,
/// ```
///
/// with the integral done by per-cell Gauss-Legendre on the interpolated
/// integrand. No mode is ever divided by `2*pi*k - xi`, so this path is an
/// independent check on [`first_order_solve`].
pub fn first_order_solve_quadrature<T: Real>(
    g: &ComplexField<T>,
    xi: Complex<T>,
) -> Result<ComplexField<T>> {
    reject_resonant(xi)?;
    let grid = g.grid();
    let n = grid.len();
    let h: T = grid.h();
    let i_unit = Complex::new(T::zero(), T::one());
    let minus_i_xi = -i_unit * xi;

    // Per-cell integrals of g(y) e^(-i xi y).
    let mut cell = Vec::with_capacity(n);
    for j in 0..n {
        let x0: T = grid.point(j);
        let mut acc = Complex::new(T::zero(), T::zero());
        for &(node, weight) in &GL4 {
            let y = x0 + h * c::<T>(node);
            let phase = (minus_i_xi * Complex::new(y, T::zero())).exp();
            acc = acc + g.eval_at(y) * phase * c::<T>(weight);
        }
        cell.push(acc * h);
    }
    // Cumulative integral Int_0^{x_j}.
    let mut cumulative = Vec::with_capacity(n);
    let mut acc = Complex::new(T::zero(), T::zero());
    for v in &cell {
        cumulative.push(acc);
        acc = acc + *v;
    }
    let total = acc;

    let e_ixi = (i_unit * xi).exp();
    let constant = e_ixi * total / (Complex::new(T::one(), T::zero()) - e_ixi);

    let values: Vec<Complex<T>> = (0..n)
        .map(|j| {
            let x: T = grid.point(j);
            let phase = (i_unit * xi * Complex::new(x, T::zero())).exp();
            i_unit * phase * (constant + cumulative[j])
        })
        .collect();
    Ok(ComplexField::from_values(grid, values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{random_trig_poly, PeriodicGrid};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grid(n: usize) -> PeriodicGrid {
        PeriodicGrid::new(n).unwrap()
    }

    #[test]
    fn apply_a_scales_sine_by_its_symbol() {
        let g = grid(64);
        let two_pi = std::f64::consts::TAU;
        let f = PeriodicField::from_fn(g, |x: f64| (two_pi * x).sin());
        let af = apply_a(&f, 1);
        let factor = 1.0 + two_pi * two_pi;
        for (a, b) in af.values().iter().zip(f.values()) {
            assert_abs_diff_eq!(a, &(factor * b), epsilon = 1e-9);
        }
        let af2 = apply_a(&f, 2);
        let factor2 = 1.0 + two_pi.powi(2) + two_pi.powi(4);
        for (a, b) in af2.values().iter().zip(f.values()) {
            assert_abs_diff_eq!(a, &(factor2 * b), epsilon = 1e-7 * factor2);
        }
    }

    #[test]
    fn invert_a_round_trips_through_apply_a() {
        let g = grid(128);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for l in 1..=4 {
            let f = random_trig_poly(g, 12, 1.0, &mut rng);
            let back = invert_a(&apply_a(&f, l), l);
            let err = back.sub(&f).sup_norm();
            assert!(err <= 1e-9, "A_l round trip error {err} at l = {l}");
        }
    }

    /// Oracle: the l = 1 inverse is convolution with the periodic kernel
    /// `cosh(|x - y| - 1/2) / (2 sinh(1/2))`, integrated here by a fine
    /// trapezoid rule whose nodes include the kernel corner.
    #[test]
    fn invert_a_matches_green_function_convolution() {
        let g = grid(256);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let f = random_trig_poly(g, 10, 1.0, &mut rng);
        let inv = invert_a(&f, 1);
        let n_quad = 8192;
        let norm = 1.0 / (2.0 * (0.5f64).sinh());
        for j in (0..g.len()).step_by(17) {
            let x: f64 = g.point(j);
            let mut acc = 0.0;
            for q in 0..n_quad {
                let y = q as f64 / n_quad as f64;
                let mut d = (x - y).abs();
                if d > 0.5 {
                    d = 1.0 - d;
                }
                acc += (d - 0.5).cosh() * norm * f.eval_at(y);
            }
            acc /= n_quad as f64;
            assert!(
                (inv.values()[j] - acc).abs() <= 1e-8,
                "Green-function oracle disagrees at x = {x}: {} vs {acc}",
                inv.values()[j]
            );
        }
    }

    #[test]
    fn operator_spec_l1_reduces_to_plus_minus_i() {
        let spec = OperatorSpec::<f64>::new(1).unwrap();
        assert_eq!(spec.roots().len(), 1);
        let xi = spec.roots()[0];
        assert_abs_diff_eq!(xi.re, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(xi.im, 1.0, epsilon = 1e-15);
        // Lambda~_+ = Lambda_- = -i d_x - i: coefficients (-i, -i) in d_x.
        let d = spec.tilde_coeffs(LambdaSign::Plus);
        assert_eq!(d.len(), 2);
        assert_abs_diff_eq!((d[0] - Complex::new(0.0, -1.0)).norm(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!((d[1] - Complex::new(0.0, -1.0)).norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn lambda_factorization_reproduces_a_for_l_up_to_4() {
        let g = grid(128);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for l in 1..=4 {
            let spec = OperatorSpec::<f64>::new(l).unwrap();
            let f = random_trig_poly(g, 8, 1.0, &mut rng);
            let target = apply_a(&f, l);
            for sign in [LambdaSign::Plus, LambdaSign::Minus] {
                let composed = spec.apply_lambda(&spec.apply_lambda_tilde(&f.to_complex(), sign), sign);
                let real = composed.realify(1e-10).expect("A_l f is real");
                let err = real.sub(&target).sup_norm();
                let scale = f.w_inf_norm(2 * l);
                assert!(
                    err <= 1e-10 * scale,
                    "factorization error {err} (scale {scale}) at l = {l}, {sign:?}"
                );
            }
        }
    }

    #[test]
    fn lambda_tilde_solve_round_trips() {
        let g = grid(64);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for l in 1..=4 {
            let spec = OperatorSpec::<f64>::new(l).unwrap();
            let f = random_trig_poly(g, 8, 1.0, &mut rng).to_complex();
            for sign in [LambdaSign::Plus, LambdaSign::Minus] {
                let back = spec.apply_lambda_tilde(&spec.solve_lambda_tilde(&f, sign), sign);
                let err = back.sub(&f).sup_norm();
                assert!(
                    err <= 1e-10 * f.sup_norm(),
                    "Lambda~ solve/apply round trip error {err} at l = {l}, {sign:?}"
                );
            }
        }
    }

    #[test]
    fn lambda_plus_and_minus_sum_to_twice_derivative() {
        let g = grid(64);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for l in 1..=3 {
            let spec = OperatorSpec::<f64>::new(l).unwrap();
            let f = random_trig_poly(g, 9, 1.0, &mut rng);
            let sum = spec
                .apply_lambda(&f.to_complex(), LambdaSign::Plus)
                .add(&spec.apply_lambda(&f.to_complex(), LambdaSign::Minus));
            // Lambda_+ + Lambda_- = -2i d_x.
            let expect = f.derivative(1).to_complex().scale(Complex::new(0.0, -2.0));
            let err = sum.sub(&expect).sup_norm();
            assert!(err <= 1e-9, "(Lambda_+ + Lambda_-) f != -2i f' at l = {l}: {err}");
        }
    }

    #[test]
    fn first_order_solve_single_mode_oracle() {
        let g = grid(64);
        let two_pi = std::f64::consts::TAU;
        // g = e^{2 pi i x}, xi = i  =>  f = e^{2 pi i x} / (2 pi - i).
        let gf = ComplexField::from_values(
            g,
            (0..g.len())
                .map(|j| Complex::from_polar(1.0, two_pi * g.point::<f64>(j)))
                .collect(),
        );
        let xi = Complex::new(0.0, 1.0);
        let f = first_order_solve(&gf, xi).unwrap();
        let denom = Complex::new(two_pi, 0.0) - xi;
        for (j, v) in f.values().iter().enumerate() {
            let expect = Complex::from_polar(1.0, two_pi * g.point::<f64>(j)) / denom;
            assert!((v - expect).norm() <= 1e-12);
        }
        // Constant right-hand side: (-i d_x - i) f = 1 has f = i.
        let ones = ComplexField::from_values(g, vec![Complex::new(1.0, 0.0); g.len()]);
        let fc = first_order_solve(&ones, xi).unwrap();
        for v in fc.values() {
            assert!((v - Complex::new(0.0, 1.0)).norm() <= 1e-13);
        }
    }

    #[test]
    fn first_order_solve_rejects_near_resonant_directions() {
        let g = grid(32);
        let gf = ComplexField::from_values(g, vec![Complex::new(1.0, 0.0); 32]);
        for xi in [
            Complex::new(0.0, 0.0),
            Complex::new(std::f64::consts::TAU, 1e-12),
            Complex::new(-2.0 * std::f64::consts::TAU + 1e-10, 0.0),
        ] {
            match first_order_solve(&gf, xi) {
                Err(Error::ResonantDirection { .. }) => {}
                other => panic!("xi = {xi} should be rejected, got {other:?}"),
            }
        }
    }

    #[test]
    fn quadrature_and_spectral_solves_agree() {
        let g = grid(256);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let real_g: PeriodicField<f64> = random_trig_poly(g, 10, 1.0, &mut rng);
        for xi in [
            Complex::new(1.3, 0.7),
            Complex::new(0.0, 1.0),
            Complex::new(-2.5, 0.0),
            Complex::new(3.0, -0.4),
        ] {
            let spectral = first_order_solve(&real_g.to_complex(), xi).unwrap();
            let quad = first_order_solve_quadrature(&real_g.to_complex(), xi).unwrap();
            let err = spectral.sub(&quad).sup_norm();
            let scale: f64 = spectral.sup_norm().max(1e-30);
            assert!(
                err / scale <= 1e-8,
                "route disagreement {:.3e} (relative) for xi = {xi}",
                err / scale
            );
        }
    }

    #[test]
    fn solving_then_applying_recovers_the_data() {
        let g = grid(128);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let data = random_trig_poly(g, 9, 1.0, &mut rng).to_complex();
        let xi = Complex::new(0.9, 0.2);
        let f = first_order_solve(&data, xi).unwrap();
        // Apply -i d_x - xi spectrally and compare.
        let two_pi = std::f64::consts::TAU;
        let back = f.apply_symbol(|k| Complex::new(two_pi * k as f64, 0.0) - xi);
        assert!(back.sub(&data).sup_norm() <= 1e-10);
    }
}
