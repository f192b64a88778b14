//! Converting stage: common-mode current on a line pair becomes a differential
//! output voltage wherever the two lines are not impedance-balanced.
//!
//! The input- and output-side parasitic deltas of each line are star-reduced
//! into `Z1..Z8`; node voltages `V1..V6` and input currents `I1, I2` then
//! follow from six nodal equations plus the definitions of the input DM
//! voltage and CM current. The output is `V_DM,O = V5 − V6`, linear in the
//! excitation with coefficients `k1..k4`.

use std::ops::Add;

use num_complex::{Complex, Complex64};
use num_traits::Float;

use crate::error::{Error, Result};
use crate::grid::{angular, FrcRow, FrequencyGrid};
use crate::numeric::{
    self, from_extended, to_extended, DenseMatrix, ExtendedComplex, ImpedanceElement,
    DEFAULT_EPSILON,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConversionNetwork {
    pub z_1i: ImpedanceElement,
    pub z_2i: ImpedanceElement,
    /// Between victim GND and signal wire at the input.
    pub z_3i: ImpedanceElement,
    pub z_1o: ImpedanceElement,
    pub z_2o: ImpedanceElement,
    /// Between victim GND and signal wire at the output (the output load).
    pub z_3o: ImpedanceElement,
    /// Component impedance along the upper line.
    pub z_l: ImpedanceElement,
    /// Component impedance along the lower line.
    pub z_r: ImpedanceElement,
}

/// A pair of elements whose mismatch drives CM-to-DM conversion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ImbalancePair {
    /// `z_1o` / `z_2o`
    OutputParasitic,
    /// `z_l` / `z_r`
    Line,
    /// `z_1i` / `z_2i`
    InputParasitic,
}

impl ImbalancePair {
    pub const ALL: [ImbalancePair; 3] = [
        ImbalancePair::OutputParasitic,
        ImbalancePair::Line,
        ImbalancePair::InputParasitic,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            ImbalancePair::OutputParasitic => "z_1o/z_2o",
            ImbalancePair::Line => "z_l/z_r",
            ImbalancePair::InputParasitic => "z_1i/z_2i",
        }
    }
}

fn rc(resistance: f64, capacitance: f64) -> ImpedanceElement {
    ImpedanceElement::new(resistance, 0.0, Some(capacitance)).expect("valid constant")
}

fn rlc(resistance: f64, inductance: f64, capacitance: f64) -> ImpedanceElement {
    ImpedanceElement::new(resistance, inductance, Some(capacitance)).expect("valid constant")
}

impl ConversionNetwork {
    /// Reference parameter set: 1 MΩ parasitics with 0.1 µF / 1.2 µF
    /// capacitance and ~20 Ω series-RLC line components, all slightly mismatched.
    pub fn reference() -> Self {
        Self {
            z_1i: rc(1e6, 1e-7),
            z_2i: rc(1e6, 1.1e-7),
            z_3i: rc(1e6, 1.21e-6),
            z_1o: rc(1e6, 0.99e-7),
            z_2o: rc(1e6, 1.01e-7),
            z_3o: rc(1e6, 1.19e-6),
            z_l: rlc(20.01, 0.049, 1.2e-3),
            z_r: rlc(19.99, 0.05, 1.1e-3),
        }
    }

    /// Replaces both members of `pair` with their elementwise mean.
    pub fn symmetrized(mut self, pair: ImbalancePair) -> Self {
        let (a, b) = match pair {
            ImbalancePair::OutputParasitic => (&mut self.z_1o, &mut self.z_2o),
            ImbalancePair::Line => (&mut self.z_l, &mut self.z_r),
            ImbalancePair::InputParasitic => (&mut self.z_1i, &mut self.z_2i),
        };
        let m = a.mean(b);
        *a = m;
        *b = m;
        self
    }

    pub fn fully_symmetrized(self) -> Self {
        ImbalancePair::ALL
            .iter()
            .fold(self, |net, pair| net.symmetrized(*pair))
    }

    /// Exchanges the roles of the two lines.
    pub fn swapped_lines(self) -> Self {
        Self {
            z_1i: self.z_2i,
            z_2i: self.z_1i,
            z_1o: self.z_2o,
            z_2o: self.z_1o,
            z_l: self.z_r,
            z_r: self.z_l,
            ..self
        }
    }
}

/// Star-reduced impedances `Z1..Z8`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedConversion {
    pub z1: Complex64,
    pub z2: Complex64,
    pub z3: Complex64,
    pub z4: Complex64,
    pub z5: Complex64,
    pub z6: Complex64,
    pub z7: Complex64,
    pub z8: Complex64,
}

impl ReducedConversion {
    pub fn as_array(&self) -> [Complex64; 8] {
        [
            self.z1, self.z2, self.z3, self.z4, self.z5, self.z6, self.z7, self.z8,
        ]
    }
}

pub fn reduce_conversion(net: &ConversionNetwork, omega: f64) -> Result<ReducedConversion> {
    // Upper delta (L, 1I, 1O): legs at (L∧1O, L∧1I, 1I∧1O) = (Z6, Z2, Z4).
    let (z6, z2, z4) = numeric::delta_to_y(
        net.z_l.evaluate(omega)?,
        net.z_1i.evaluate(omega)?,
        net.z_1o.evaluate(omega)?,
    )?;
    // Lower delta (R, 2I, 2O): (Z7, Z3, Z5).
    let (z7, z3, z5) = numeric::delta_to_y(
        net.z_r.evaluate(omega)?,
        net.z_2i.evaluate(omega)?,
        net.z_2o.evaluate(omega)?,
    )?;
    Ok(ReducedConversion {
        z1: net.z_3i.evaluate(omega)?,
        z2,
        z3,
        z4,
        z5,
        z6,
        z7,
        z8: net.z_3o.evaluate(omega)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ConversionExcitation {
    /// Input DM voltage `V1 − V2`.
    pub v_dm_i: Complex64,
    /// Input CM current `I1 + I2 − I3 − I4`.
    pub i_cm: Complex64,
    pub i_3: Complex64,
    pub i_4: Complex64,
}

impl ConversionExcitation {
    pub fn pure_cm(i_cm: Complex64) -> Self {
        Self {
            i_cm,
            ..Self::default()
        }
    }

    pub fn pure_dm(v_dm_i: Complex64) -> Self {
        Self {
            v_dm_i,
            ..Self::default()
        }
    }

    fn is_finite(&self) -> bool {
        [self.v_dm_i, self.i_cm, self.i_3, self.i_4]
            .iter()
            .all(|v| v.re.is_finite() && v.im.is_finite())
    }
}

impl Add for ConversionExcitation {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        Self {
            v_dm_i: self.v_dm_i + rhs.v_dm_i,
            i_cm: self.i_cm + rhs.i_cm,
            i_3: self.i_3 + rhs.i_3,
            i_4: self.i_4 + rhs.i_4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConversionSolution {
    /// Node voltages `V1..V6`.
    pub v: [Complex64; 6],
    pub i1: Complex64,
    pub i2: Complex64,
    /// `V5 − V6`, taken before rounding the node voltages to double.
    pub v_dm_o: Complex64,
}

/// Nodal system `A·[V1..V6, I1, I2]ᵀ = [0, 0, 0, 0, I3, I4, I_CM+I3+I4, V_DM,I]ᵀ`
/// in double-double precision.
pub fn assemble_nodal(
    z: &ReducedConversion,
    exc: &ConversionExcitation,
) -> (DenseMatrix<ExtendedComplex>, Vec<ExtendedComplex>) {
    let one = to_extended(Complex64::new(1.0, 0.0));
    let y = |v: Complex64| one / to_extended(v);
    let [y1, y2, y3, y4, y5, y6, y7, y8] = z.as_array().map(y);
    let mut a = DenseMatrix::<ExtendedComplex>::zeros(8, 8);

    // I1 − (V1−V3)/Z2 − (V1−V2)/Z1 = 0
    a[(0, 0)] = -y1 - y2;
    a[(0, 1)] = y1;
    a[(0, 2)] = y2;
    a[(0, 6)] = one;
    // I2 + (V1−V2)/Z1 + (V4−V2)/Z3 = 0
    a[(1, 0)] = y1;
    a[(1, 1)] = -y1 - y3;
    a[(1, 3)] = y3;
    a[(1, 7)] = one;
    // (V1−V3)/Z2 − (V3−V5)/Z6 − V3/Z4 = 0
    a[(2, 0)] = y2;
    a[(2, 2)] = -y2 - y4 - y6;
    a[(2, 4)] = y6;
    // (V6−V4)/Z7 − (V4−V2)/Z3 − V4/Z5 = 0
    a[(3, 1)] = y3;
    a[(3, 3)] = -y3 - y5 - y7;
    a[(3, 5)] = y7;
    // (V3−V5)/Z6 − (V5−V6)/Z8 = I3
    a[(4, 2)] = y6;
    a[(4, 4)] = -y6 - y8;
    a[(4, 5)] = y8;
    // (V5−V6)/Z8 − (V6−V4)/Z7 = I4
    a[(5, 3)] = y7;
    a[(5, 4)] = y8;
    a[(5, 5)] = -y7 - y8;
    // I1 + I2 = I_CM + I3 + I4
    a[(6, 6)] = one;
    a[(6, 7)] = one;
    // V1 − V2 = V_DM,I
    a[(7, 0)] = one;
    a[(7, 1)] = -one;

    let zero = to_extended(Complex64::new(0.0, 0.0));
    let b = vec![
        zero,
        zero,
        zero,
        zero,
        to_extended(exc.i_3),
        to_extended(exc.i_4),
        to_extended(exc.i_cm) + to_extended(exc.i_3) + to_extended(exc.i_4),
        to_extended(exc.v_dm_i),
    ];
    (a, b)
}

pub fn solve_conversion(
    net: &ConversionNetwork,
    exc: &ConversionExcitation,
    omega: f64,
) -> Result<ConversionSolution> {
    if !exc.is_finite() {
        return Err(Error::InvalidArgument("excitation must be finite".into()));
    }
    let z = reduce_conversion(net, omega)?;
    solve_reduced(&z, exc)
}

pub fn solve_reduced(
    z: &ReducedConversion,
    exc: &ConversionExcitation,
) -> Result<ConversionSolution> {
    let (a, b) = assemble_nodal(z, exc);
    let x = numeric::solve_linear_extended(&a, &b)?;
    let mut v = [Complex64::new(0.0, 0.0); 6];
    for (dst, src) in v.iter_mut().zip(&x[..6]) {
        *dst = from_extended(*src);
    }
    Ok(ConversionSolution {
        v,
        i1: from_extended(x[6]),
        i2: from_extended(x[7]),
        v_dm_o: from_extended(x[4] - x[5]),
    })
}

/// Output coefficients and the factorization `k2 = c1·c2·(h1 + h2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConversionCoefficients {
    /// DM-to-DM gain (dimensionless).
    pub k1: Complex64,
    /// CM current to DM voltage (ohm).
    pub k2: Complex64,
    pub k3: Complex64,
    pub k4: Complex64,
    pub c1: Complex64,
    pub c2: Complex64,
    /// `Z_R (Z_1O − Z_2O)`
    pub h1: Complex64,
    /// `Z_2O (Z_R − Z_L)`
    pub h2: Complex64,
    /// `h1 + h2` rounded once. The two terms can nearly cancel, so adding the
    /// rounded `h1` and `h2` may lose most of the digits.
    pub h_sum: Complex64,
}

impl ConversionCoefficients {
    /// Scale used to judge whether `k2` is numerically zero.
    pub fn scale(&self) -> f64 {
        self.k1.norm().max(self.k3.norm()).max(self.k4.norm())
    }
}

/// `k1..k4` from the reduced impedances. Returns the shared denominator too.
pub fn closed_form_k(z: &ReducedConversion) -> Result<([Complex64; 4], Complex64)> {
    closed_form_k_generic(z.as_array())
}

fn closed_form_k_generic<T: Float>(z: [Complex<T>; 8]) -> Result<([Complex<T>; 4], Complex<T>)> {
    let [_, z2, z3, z4, z5, z6, z7, z8] = z;
    let inner = z2 + z3 + z4 + z5;
    let denom = (z6 + z7 + z8) * inner + (z2 + z3) * (z4 + z5);
    let magnitude = denom.re.hypot(denom.im).to_f64().unwrap_or(0.0);
    if !(magnitude >= DEFAULT_EPSILON) {
        return Err(Error::NearZero {
            what: "shared denominator",
            magnitude,
        });
    }
    let k1 = z8 * (z4 + z5) / denom;
    let k2 = z8 * (z3 * z4 - z2 * z5) / denom;
    let k3 = -(z8 * (z6 * inner + z2 * (z4 + z5))) / denom;
    let k4 = z8 * (z7 * inner + z3 * (z4 + z5)) / denom;
    Ok(([k1, k2, k3, k4], denom))
}

/// All coefficients, evaluated in double-double from the element impedances
/// and rounded once. The `k2` numerator and `h1 + h2` both cancel heavily on
/// nearly balanced networks.
pub fn conversion_coefficients(
    net: &ConversionNetwork,
    omega: f64,
) -> Result<ConversionCoefficients> {
    let x = |e: &ImpedanceElement| e.evaluate(omega).map(to_extended);
    let (z_1i, z_2i, z_1o, z_2o, z_l, z_r) = (
        x(&net.z_1i)?,
        x(&net.z_2i)?,
        x(&net.z_1o)?,
        x(&net.z_2o)?,
        x(&net.z_l)?,
        x(&net.z_r)?,
    );
    let (z6, z2, z4) = numeric::delta_to_y_extended(z_l, z_1i, z_1o)?;
    let (z7, z3, z5) = numeric::delta_to_y_extended(z_r, z_2i, z_2o)?;
    let z8 = x(&net.z_3o)?;
    let (k, denom) = closed_form_k_generic([x(&net.z_3i)?, z2, z3, z4, z5, z6, z7, z8])?;

    let c1 = z8 / denom;
    let c2 = z_1i * z_2i / ((z_l + z_1i + z_1o) * (z_r + z_2i + z_2o));
    let h1 = z_r * (z_1o - z_2o);
    let h2 = z_2o * (z_r - z_l);
    let [k1, k2, k3, k4] = k.map(from_extended);
    Ok(ConversionCoefficients {
        k1,
        k2,
        k3,
        k4,
        c1: from_extended(c1),
        c2: from_extended(c2),
        h1: from_extended(h1),
        h2: from_extended(h2),
        h_sum: from_extended(h1 + h2),
    })
}

/// `k1·V_DM,I + k2·I_CM + k3·I3 + k4·I4`.
pub fn v_dm_o_closed_form(
    coeffs: &ConversionCoefficients,
    exc: &ConversionExcitation,
) -> Complex64 {
    coeffs.k1 * exc.v_dm_i + coeffs.k2 * exc.i_cm + coeffs.k3 * exc.i_3 + coeffs.k4 * exc.i_4
}

/// `|k2|` (ohm) and its phase over a frequency grid.
pub fn frc_conversion(net: &ConversionNetwork, grid: &FrequencyGrid) -> Result<Vec<FrcRow>> {
    grid.par_map(|hz| {
        let k2 = conversion_coefficients(net, angular(hz))?.k2;
        Ok(FrcRow {
            frequency_hz: hz,
            magnitude: k2.norm(),
            phase_rad: k2.arg(),
        })
    })
}
