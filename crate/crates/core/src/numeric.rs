//! Complex phasor arithmetic, lumped R-L-C elements, delta-Y reduction and
//! a small dense complex LU solver.
//!
//! The solver is generic over the real scalar so the same elimination code
//! runs in `f64` and in double-double ([`TwoFloat`]) precision.

use std::ops::{Index, IndexMut};

use num_complex::{Complex, Complex64};
use num_traits::{Float, One, Zero};
use twofloat::TwoFloat;

use crate::error::{Error, Result};

/// Magnitude below which a delta sum or a pivot is treated as zero.
pub const DEFAULT_EPSILON: f64 = 1e-30;

/// Complex value in double-double precision.
pub type ExtendedComplex = Complex<TwoFloat>;

pub fn to_extended(z: Complex64) -> ExtendedComplex {
    Complex::new(TwoFloat::from(z.re), TwoFloat::from(z.im))
}

pub fn from_extended(z: ExtendedComplex) -> Complex64 {
    Complex64::new(f64::from(z.re), f64::from(z.im))
}

/// Series R-L-C element. A missing capacitance means the capacitive branch is
/// shorted and contributes no reactance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImpedanceElement {
    resistance: f64,
    inductance: f64,
    capacitance: Option<f64>,
}

impl ImpedanceElement {
    pub fn new(resistance: f64, inductance: f64, capacitance: Option<f64>) -> Result<Self> {
        if !resistance.is_finite() || resistance < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "resistance must be finite and >= 0, got {resistance}"
            )));
        }
        if !inductance.is_finite() || inductance < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "inductance must be finite and >= 0, got {inductance}"
            )));
        }
        if let Some(c) = capacitance {
            if !c.is_finite() || c <= 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "capacitance must be finite and > 0 (use `absent` for a shorted branch), got {c}"
                )));
            }
        }
        Ok(Self {
            resistance,
            inductance,
            capacitance,
        })
    }

    pub fn resistor(resistance: f64) -> Result<Self> {
        Self::new(resistance, 0.0, None)
    }

    /// A zero-ohm element.
    pub fn short() -> Self {
        Self {
            resistance: 0.0,
            inductance: 0.0,
            capacitance: None,
        }
    }

    pub fn resistance(&self) -> f64 {
        self.resistance
    }

    pub fn inductance(&self) -> f64 {
        self.inductance
    }

    pub fn capacitance(&self) -> Option<f64> {
        self.capacitance
    }

    /// Inverse capacitance, zero for an absent capacitor.
    pub fn elastance(&self) -> f64 {
        self.capacitance.map_or(0.0, |c| 1.0 / c)
    }

    /// `R + jωL + 1/(jωC)`, with the last term dropped when the capacitor is absent.
    pub fn evaluate(&self, omega: f64) -> Result<Complex64> {
        check_omega(omega)?;
        let mut reactance = omega * self.inductance;
        if let Some(c) = self.capacitance {
            reactance -= 1.0 / (omega * c);
        }
        Ok(Complex64::new(self.resistance, reactance))
    }

    /// Elementwise mean in the parameters the impedance is linear in
    /// (R, L and 1/C), so the result evaluates to `(Z_a + Z_b) / 2` at every ω.
    pub fn mean(&self, other: &Self) -> Self {
        let elastance = 0.5 * (self.elastance() + other.elastance());
        Self {
            resistance: 0.5 * (self.resistance + other.resistance),
            inductance: 0.5 * (self.inductance + other.inductance),
            capacitance: (elastance > 0.0).then(|| 1.0 / elastance),
        }
    }

    /// Scales R, L and 1/C by `factor`, which scales the impedance by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !factor.is_finite() || factor <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "scale factor must be finite and > 0, got {factor}"
            )));
        }
        Self::new(
            self.resistance * factor,
            self.inductance * factor,
            self.capacitance.map(|c| c / factor),
        )
    }
}

pub fn evaluate_impedance(elem: &ImpedanceElement, omega: f64) -> Result<Complex64> {
    elem.evaluate(omega)
}

pub(crate) fn check_omega(omega: f64) -> Result<()> {
    if omega.is_finite() && omega > 0.0 {
        Ok(())
    } else {
        Err(Error::NonPositiveFrequency(omega))
    }
}

/// Delta-to-Y reduction. Each star leg is the product of the two delta legs
/// meeting at that node over the sum of all three:
/// `z_a = z_ab·z_ca / Σ`, `z_b = z_ab·z_bc / Σ`, `z_c = z_bc·z_ca / Σ`.
pub fn delta_to_y(
    z_ab: Complex64,
    z_bc: Complex64,
    z_ca: Complex64,
) -> Result<(Complex64, Complex64, Complex64)> {
    delta_to_y_with_epsilon(z_ab, z_bc, z_ca, DEFAULT_EPSILON)
}

pub fn delta_to_y_with_epsilon(
    z_ab: Complex64,
    z_bc: Complex64,
    z_ca: Complex64,
    epsilon: f64,
) -> Result<(Complex64, Complex64, Complex64)> {
    delta_to_y_generic(z_ab, z_bc, z_ca, epsilon)
}

/// [`delta_to_y`] in double-double precision.
pub fn delta_to_y_extended(
    z_ab: ExtendedComplex,
    z_bc: ExtendedComplex,
    z_ca: ExtendedComplex,
) -> Result<(ExtendedComplex, ExtendedComplex, ExtendedComplex)> {
    delta_to_y_generic(z_ab, z_bc, z_ca, DEFAULT_EPSILON)
}

fn delta_to_y_generic<T: Float>(
    z_ab: Complex<T>,
    z_bc: Complex<T>,
    z_ca: Complex<T>,
    epsilon: f64,
) -> Result<(Complex<T>, Complex<T>, Complex<T>)> {
    let sum = z_ab + z_bc + z_ca;
    let magnitude = sum.re.hypot(sum.im).to_f64().unwrap_or(0.0);
    if !(magnitude >= epsilon) {
        return Err(Error::DegenerateDelta { magnitude });
    }
    Ok((z_ab * z_ca / sum, z_ab * z_bc / sum, z_bc * z_ca / sum))
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

pub type ComplexMatrix = DenseMatrix<Complex64>;

impl<T: Clone + Zero> DenseMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn from_rows(rows: Vec<Vec<T>>) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_cols) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        Ok(Self {
            rows: n_rows,
            cols: n_cols,
            data: rows.into_iter().flatten().collect(),
        })
    }

    pub fn identity(n: usize) -> Self
    where
        T: One,
    {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn map<U, F: Fn(&T) -> U>(&self, f: F) -> DenseMatrix<U> {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(f).collect(),
        }
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T>
    where
        T: std::ops::Mul<Output = T>,
    {
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(x)
                    .fold(T::zero(), |acc, (a, b)| acc + a.clone() * b.clone())
            })
            .collect()
    }
}

impl<T> Index<(usize, usize)> for DenseMatrix<T> {
    type Output = T;

    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for DenseMatrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// `‖a·x − b‖∞ / ‖b‖∞` (absolute when `b` is zero).
pub fn relative_residual(a: &ComplexMatrix, x: &[Complex64], b: &[Complex64]) -> f64 {
    let ax = a.mul_vec(x);
    let num = ax
        .iter()
        .zip(b)
        .map(|(l, r)| (l - r).norm())
        .fold(0.0, f64::max);
    let den = b.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if den > 0.0 {
        num / den
    } else {
        num
    }
}

/// Solves `a·x = b` in double precision.
pub fn solve_linear(a: &ComplexMatrix, b: &[Complex64]) -> Result<Vec<Complex64>> {
    solve_dense(a, b, DEFAULT_EPSILON)
}

/// Solves `a·x = b` in double-double precision.
pub fn solve_linear_extended(
    a: &DenseMatrix<ExtendedComplex>,
    b: &[ExtendedComplex],
) -> Result<Vec<ExtendedComplex>> {
    solve_dense(a, b, DEFAULT_EPSILON)
}

/// |re| + |im|, the pivoting magnitude used by LAPACK's complex routines.
fn cabs1<T: Float>(z: &Complex<T>) -> T {
    z.re.abs() + z.im.abs()
}

struct LuFactors<T> {
    lu: DenseMatrix<Complex<T>>,
    perm: Vec<usize>,
}

impl<T: Float> LuFactors<T> {
    fn solve(&self, rhs: &[Complex<T>]) -> Vec<Complex<T>> {
        let n = self.perm.len();
        let mut y: Vec<Complex<T>> = self.perm.iter().map(|&p| rhs[p]).collect();
        for i in 0..n {
            for j in 0..i {
                let l = self.lu[(i, j)];
                let yj = y[j];
                y[i] = y[i] - l * yj;
            }
        }
        for i in (0..n).rev() {
            for j in (i + 1)..n {
                let u = self.lu[(i, j)];
                let yj = y[j];
                y[i] = y[i] - u * yj;
            }
            y[i] = y[i] / self.lu[(i, i)];
        }
        y
    }
}

/// Row-equilibrated LU with partial pivoting followed by one step of
/// iterative refinement.
pub fn solve_dense<T: Float>(
    a: &DenseMatrix<Complex<T>>,
    b: &[Complex<T>],
    epsilon: f64,
) -> Result<Vec<Complex<T>>> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::Dimension(format!(
            "matrix must be square, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    if b.len() != n {
        return Err(Error::Dimension(format!(
            "matrix is {n}x{n} but right-hand side has {} entries",
            b.len()
        )));
    }
    if n == 0 {
        return Ok(Vec::new());
    }

    let mut scaled = a.clone();
    let mut rhs = b.to_vec();
    for i in 0..n {
        let s = (0..n).map(|j| cabs1(&a[(i, j)])).fold(T::zero(), T::max);
        if s.to_f64().unwrap_or(0.0) < epsilon {
            return Err(Error::Singular {
                index: i,
                magnitude: s.to_f64().unwrap_or(0.0),
            });
        }
        let inv = Complex::new(s.recip(), T::zero());
        for j in 0..n {
            scaled[(i, j)] = scaled[(i, j)] * inv;
        }
        rhs[i] = rhs[i] * inv;
    }

    let mut lu = scaled.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let mut pivot_row = k;
        let mut pivot_mag = cabs1(&lu[(k, k)]);
        for i in (k + 1)..n {
            let mag = cabs1(&lu[(i, k)]);
            if mag > pivot_mag {
                pivot_row = i;
                pivot_mag = mag;
            }
        }
        let magnitude = pivot_mag.to_f64().unwrap_or(0.0);
        if !(magnitude >= epsilon) {
            return Err(Error::Singular {
                index: k,
                magnitude,
            });
        }
        if pivot_row != k {
            for j in 0..n {
                let tmp = lu[(k, j)];
                lu[(k, j)] = lu[(pivot_row, j)];
                lu[(pivot_row, j)] = tmp;
            }
            perm.swap(k, pivot_row);
        }
        let pivot = lu[(k, k)];
        for i in (k + 1)..n {
            let factor = lu[(i, k)] / pivot;
            lu[(i, k)] = factor;
            if factor.is_zero() {
                continue;
            }
            for j in (k + 1)..n {
                let ukj = lu[(k, j)];
                lu[(i, j)] = lu[(i, j)] - factor * ukj;
            }
        }
    }

    let factors = LuFactors { lu, perm };
    let mut x = factors.solve(&rhs);
    let ax = scaled.mul_vec(&x);
    let residual: Vec<Complex<T>> = rhs.iter().zip(&ax).map(|(r, v)| *r - *v).collect();
    let correction = factors.solve(&residual);
    for (xi, di) in x.iter_mut().zip(correction) {
        *xi = *xi + di;
    }

    if x.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(Error::Singular {
            index: n - 1,
            magnitude: 0.0,
        });
    }
    Ok(x)
}
