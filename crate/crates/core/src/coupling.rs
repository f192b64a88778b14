//! Coupling stage: an attack voltage on the victim's ground wire drives common-mode
//! current into the parallel signal wire through two parasitic capacitance deltas.
//!
//! Each delta (attacker ground `a`, victim ground `g`, victim signal `s`) is
//! reduced to a star, leaving three current loops with unknowns
//! `x = [I_a, I_g, I_s]`. Collecting coefficients of the loop equations gives
//! `A·x = [V_s, 0, 0]ᵀ` with `P = Z12 + Z_sig + Z22`:
//!
//! ```text
//! | Z11+Z13   -(Z11+Z13)       -Z13        |
//! | Z11       -(Z11+Z21+Z_g)    P          |
//! | -Z13       Z23+Z13          P+Z23+Z13  |
//! ```
//!
//! `Z_sig` is the series impedance of the signal branch (`z_s + z_v`).

use num_complex::{Complex, Complex64};
use num_traits::{Float, One, Zero};

use crate::error::{Error, Result};
use crate::grid::{angular, FrcRow, FrequencyGrid};
use crate::numeric::{
    self, ComplexMatrix, DenseMatrix, ExtendedComplex, ImpedanceElement, DEFAULT_EPSILON,
};

/// Lumped coupling-stage circuit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingNetwork {
    /// Attack source amplitude `V_s`. Treated purely as a linear scale.
    pub source_amplitude: f64,
    /// First parasitic delta: attacker GND to victim GND.
    pub z_ga1: ImpedanceElement,
    /// First parasitic delta: attacker GND to signal wire.
    pub z_sa1: ImpedanceElement,
    /// First parasitic delta: victim GND to signal wire.
    pub z_gs1: ImpedanceElement,
    pub z_ga2: ImpedanceElement,
    pub z_sa2: ImpedanceElement,
    pub z_gs2: ImpedanceElement,
    /// Victim ground line impedance.
    pub z_g: ImpedanceElement,
    /// Victim signal line impedance.
    pub z_s: ImpedanceElement,
    /// Far-end load in series with the signal branch.
    pub z_v: ImpedanceElement,
}

fn rc(resistance: f64, capacitance: f64) -> ImpedanceElement {
    ImpedanceElement::new(resistance, 0.0, Some(capacitance)).expect("valid constant")
}

fn rlc(resistance: f64, inductance: f64, capacitance: f64) -> ImpedanceElement {
    ImpedanceElement::new(resistance, inductance, Some(capacitance)).expect("valid constant")
}

impl CouplingNetwork {
    /// Reference parameter set: 300 V source, 1 MΩ parasitic paths with
    /// ~10 µF coupling capacitance, low-ohm line impedances.
    pub fn reference() -> Self {
        Self {
            source_amplitude: 300.0,
            z_ga1: rc(1e6, 1e-5),
            z_sa1: rc(1e6, 0.99e-5),
            z_gs1: rc(1e6, 1.21e-5),
            z_ga2: rc(1e6, 1.01e-5),
            z_sa2: rc(1e6, 0.98e-5),
            z_gs2: rc(1e6, 1.19e-5),
            z_g: rlc(0.0001001, 4.43e-6, 0.99e-9),
            z_s: rlc(0.00099, 5e-6, 1.1e-9),
            z_v: ImpedanceElement::short(),
        }
    }

    pub fn with_source(mut self, source_amplitude: f64) -> Self {
        self.source_amplitude = source_amplitude;
        self
    }

    /// Applies `f` to each of the six parasitic delta elements.
    pub fn map_parasitics<F>(mut self, f: F) -> Result<Self>
    where
        F: Fn(&ImpedanceElement) -> Result<ImpedanceElement>,
    {
        for z in [
            &mut self.z_ga1,
            &mut self.z_sa1,
            &mut self.z_gs1,
            &mut self.z_ga2,
            &mut self.z_sa2,
            &mut self.z_gs2,
        ] {
            *z = f(z)?;
        }
        Ok(self)
    }
}

/// Star legs of the two reduced deltas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingLegs {
    pub z11: Complex64,
    pub z12: Complex64,
    pub z13: Complex64,
    pub z21: Complex64,
    pub z22: Complex64,
    pub z23: Complex64,
}

pub fn reduce_deltas(net: &CouplingNetwork, omega: f64) -> Result<CouplingLegs> {
    let [z11, z12, z13, z21, z22, z23] =
        extended_loop(net, omega)?.legs.map(numeric::from_extended);
    Ok(CouplingLegs {
        z11,
        z12,
        z13,
        z21,
        z22,
        z23,
    })
}

/// Impedances the loop equations are written in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopImpedances {
    pub legs: CouplingLegs,
    pub z_g: Complex64,
    /// Signal branch series impedance, `z_s + z_v`.
    pub z_sig: Complex64,
}

pub fn loop_impedances(net: &CouplingNetwork, omega: f64) -> Result<LoopImpedances> {
    let x = extended_loop(net, omega)?;
    let [z11, z12, z13, z21, z22, z23] = x.legs.map(numeric::from_extended);
    Ok(LoopImpedances {
        legs: CouplingLegs {
            z11,
            z12,
            z13,
            z21,
            z22,
            z23,
        },
        z_g: numeric::from_extended(x.z_g),
        z_sig: numeric::from_extended(x.z_sig),
    })
}

/// Loop impedances kept in double-double, legs ordered `Z11 Z12 Z13 Z21 Z22 Z23`.
/// Both the solve and the closed form start from these, so their agreement
/// is limited only by the conditioning of the network, not by rounding in
/// the delta reduction.
struct ExtendedLoop {
    legs: [ExtendedComplex; 6],
    z_g: ExtendedComplex,
    z_sig: ExtendedComplex,
}

fn extended_loop(net: &CouplingNetwork, omega: f64) -> Result<ExtendedLoop> {
    let x = |e: &ImpedanceElement| e.evaluate(omega).map(numeric::to_extended);
    // Star node order (g, a, s): z_ab = z_ga, z_bc = z_sa, z_ca = z_gs
    // gives legs (g, a, s) = (Z_x1, Z_x3, Z_x2).
    let (z11, z13, z12) =
        numeric::delta_to_y_extended(x(&net.z_ga1)?, x(&net.z_sa1)?, x(&net.z_gs1)?)?;
    let (z21, z23, z22) =
        numeric::delta_to_y_extended(x(&net.z_ga2)?, x(&net.z_sa2)?, x(&net.z_gs2)?)?;
    Ok(ExtendedLoop {
        legs: [z11, z12, z13, z21, z22, z23],
        z_g: x(&net.z_g)?,
        z_sig: x(&net.z_s)? + x(&net.z_v)?,
    })
}

fn kvl_matrix<T: Float>(
    legs: [Complex<T>; 6],
    z_g: Complex<T>,
    z_sig: Complex<T>,
) -> DenseMatrix<Complex<T>> {
    let [z11, z12, z13, z21, z22, z23] = legs;
    let p = z12 + z_sig + z22;
    let mut a = DenseMatrix::zeros(3, 3);
    a[(0, 0)] = z11 + z13;
    a[(0, 1)] = -(z11 + z13);
    a[(0, 2)] = -z13;
    a[(1, 0)] = z11;
    a[(1, 1)] = -(z11 + z21 + z_g);
    a[(1, 2)] = p;
    a[(2, 0)] = -z13;
    a[(2, 1)] = z23 + z13;
    a[(2, 2)] = p + z23 + z13;
    a
}

/// Loop-current system `A·[I_a, I_g, I_s]ᵀ = [V_s, 0, 0]ᵀ`.
pub fn assemble_kvl(z: &LoopImpedances, source_amplitude: f64) -> (ComplexMatrix, Vec<Complex64>) {
    let l = z.legs;
    let a = kvl_matrix([l.z11, l.z12, l.z13, l.z21, l.z22, l.z23], z.z_g, z.z_sig);
    let b = vec![
        Complex64::new(source_amplitude, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::new(0.0, 0.0),
    ];
    (a, b)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingSolution {
    pub i_a: Complex64,
    pub i_g: Complex64,
    pub i_s: Complex64,
    /// `(I_g + I_s) / 2`.
    pub i_cm: Complex64,
    /// Coupling factor `I_CM / V_s`; depends only on the impedances.
    pub mu: Complex64,
    pub omega: f64,
}

/// Solves the loop system in double-double and rounds the currents.
pub fn solve_coupling(net: &CouplingNetwork, omega: f64) -> Result<CouplingSolution> {
    let z = extended_loop(net, omega)?;
    let vs = net.source_amplitude;
    // Solve at unit drive and scale, so μ is defined even for V_s = 0 and
    // currents are exactly linear in V_s.
    let a = kvl_matrix(z.legs, z.z_g, z.z_sig);
    let zero = ExtendedComplex::zero();
    let b = [ExtendedComplex::one(), zero, zero];
    let x = numeric::solve_linear_extended(&a, &b)?;
    let half = numeric::to_extended(Complex64::new(0.5, 0.0));
    let mu = numeric::from_extended((x[1] + x[2]) * half);
    let [i_a, i_g, i_s] = [x[0], x[1], x[2]].map(numeric::from_extended);
    let (i_g, i_s) = (i_g * vs, i_s * vs);
    Ok(CouplingSolution {
        i_a: i_a * vs,
        i_g,
        i_s,
        i_cm: (i_g + i_s) * 0.5,
        mu,
        omega,
    })
}

/// Numerator and denominator polynomial of the explicit coupling factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedFormMu {
    /// `(Z11+Z13)(Z12+Z22+Z_sig) + Z13(Z21+Z_g+Z11)`
    pub numerator: Complex64,
    /// The 25-term cubic `F`.
    pub f_poly: Complex64,
}

impl ClosedFormMu {
    /// `N / F`, which equals `(I_g + I_s) / V_s`.
    pub fn branch_sum_ratio(&self) -> Complex64 {
        self.numerator / self.f_poly
    }

    /// `I_CM / V_s = N / (2F)`.
    pub fn mu(&self) -> Complex64 {
        self.numerator / (self.f_poly * 2.0)
    }
}

/// `N` and `F` evaluated in double-double and rounded once.
pub fn closed_form_terms(net: &CouplingNetwork, omega: f64) -> Result<ClosedFormMu> {
    let z = extended_loop(net, omega)?;
    let [z11, z12, z13, z21, z22, z23] = z.legs;
    let (zg, zv) = (z.z_g, z.z_sig);
    let numerator = (z11 + z13) * (z12 + z22 + zv) + z13 * (z21 + zg + z11);
    let f_poly = z11 * z12 * z21
        + z11 * z13 * z21
        + z11 * z12 * z23
        + z12 * z13 * z21
        + z11 * z13 * z23
        + z12 * z13 * z23
        + z11 * z21 * z22
        + z11 * z21 * z23
        + z11 * z22 * z23
        + z13 * z21 * z22
        + z13 * z21 * z23
        + z13 * z22 * z23
        + z11 * z12 * zg
        + z11 * z13 * zg
        + z12 * z13 * zg
        + z11 * z22 * zg
        + z11 * z23 * zg
        + z13 * z22 * zg
        + z13 * z23 * zg
        + z11 * z21 * zv
        + z11 * z23 * zv
        + z13 * z21 * zv
        + z13 * z23 * zv
        + z11 * zg * zv
        + z13 * zg * zv;
    Ok(ClosedFormMu {
        numerator: numeric::from_extended(numerator),
        f_poly: numeric::from_extended(f_poly),
    })
}

/// Coupling factor from the explicit polynomial form.
pub fn coupling_factor_closed_form(net: &CouplingNetwork, omega: f64) -> Result<Complex64> {
    let terms = closed_form_terms(net, omega)?;
    let magnitude = terms.f_poly.norm();
    if !(magnitude >= DEFAULT_EPSILON) {
        return Err(Error::NearZero {
            what: "F",
            magnitude,
        });
    }
    Ok(terms.mu())
}

/// `|I_CM|` and its phase over a frequency grid.
pub fn frc_cm_current(net: &CouplingNetwork, grid: &FrequencyGrid) -> Result<Vec<FrcRow>> {
    grid.par_map(|hz| {
        let sol = solve_coupling(net, angular(hz))?;
        Ok(FrcRow {
            frequency_hz: hz,
            magnitude: sol.i_cm.norm(),
            phase_rad: sol.i_cm.arg(),
        })
    })
}
