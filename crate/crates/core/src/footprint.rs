//! Length budgets of integrated interferometer layouts: S-bends,
//! directional couplers, the Clements mesh, continuously-coupled lattices
//! and fibre fan-in/out sections. Lengths in mm, coupling rates in mm⁻¹.

use std::f64::consts::FRAC_PI_2;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LatticeKind {
    Linear,
    Square,
    Triangular,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FanArrangement {
    /// Fibres on one line at pitch `p_F`.
    Linear,
    /// Fibres on a `⌈√m⌉`-wide square grid at pitch `p_F`.
    Grid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FootprintParams {
    /// Minimum bend radius.
    pub r_min: f64,
    /// Waveguide pitch of the planar mesh.
    pub pitch: f64,
    /// Fibre pitch at the facets.
    pub fiber_pitch: f64,
    /// Coupling rate of the Clements couplers.
    pub c_clements: f64,
    /// Coupling rate of the continuously-coupled lattice.
    pub c_lattice: f64,
    pub m: usize,
    /// Spreading constant of the 2D lattices.
    pub b: f64,
    pub lattice_kind: LatticeKind,
    pub fan_arrangement: FanArrangement,
}

impl Default for FootprintParams {
    fn default() -> Self {
        Self {
            r_min: 30.0,
            pitch: 0.06,
            fiber_pitch: 0.25,
            c_clements: 1.0,
            c_lattice: 0.2,
            m: 32,
            b: 2.0,
            lattice_kind: LatticeKind::Triangular,
            fan_arrangement: FanArrangement::Grid,
        }
    }
}

impl FootprintParams {
    pub fn validate(&self) -> Result<()> {
        let lengths = [
            ("r_min", self.r_min),
            ("pitch", self.pitch),
            ("fiber_pitch", self.fiber_pitch),
            ("c_clements", self.c_clements),
            ("c_lattice", self.c_lattice),
            ("b", self.b),
        ];
        if let Some((name, v)) = lengths.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::Config(format!("{name} must be positive, got {v}")));
        }
        check_modes(self.m)
    }
}

fn check_modes(m: usize) -> Result<()> {
    if m < 2 {
        return Err(Error::Domain(format!("need m >= 2 modes, got {m}")));
    }
    Ok(())
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::Domain(format!("{name} must be positive, got {v}")));
    }
    Ok(())
}

/// Sinusoidal S-bend of lateral offset `h`: `L_S = (π/2)·√(2 R_min h)`.
pub fn sbend_length(r_min: f64, h: f64) -> Result<f64> {
    check_positive("r_min", r_min)?;
    if !(h >= 0.0) {
        return Err(Error::Domain(format!("offset must be non-negative, got {h}")));
    }
    Ok(FRAC_PI_2 * (2.0 * r_min * h).sqrt())
}

/// `𝓡 = sin²(c·L_C + φ₀)`.
pub fn coupler_reflectivity(c: f64, l_c: f64, phi0: f64) -> f64 {
    (c * l_c + phi0).sin().powi(2)
}

/// Length of a full-transfer coupler, `π/(2c)`.
pub fn coupler_length(c: f64) -> Result<f64> {
    check_positive("c", c)?;
    Ok(FRAC_PI_2 / c)
}

/// Clements mesh: `m−1` S-bend stages of offset `p` and `m` coupler stages.
pub fn clements_length(m: usize, r_min: f64, p: f64, c: f64) -> Result<f64> {
    check_modes(m)?;
    Ok((m - 1) as f64 * sbend_length(r_min, p)? + m as f64 * coupler_length(c)?)
}

/// `dL_Clem/dm = (π/2)(√(2 R_min p) + 1/c)`.
pub fn clements_increment(r_min: f64, p: f64, c: f64) -> Result<f64> {
    Ok(sbend_length(r_min, p)? + coupler_length(c)?)
}

/// Propagation constant `β_z` of a plane wave with transverse components
/// `(β_x, β_y)`; `β_y` is ignored for the linear chain.
pub fn dispersion(kind: LatticeKind, c: f64, beta_x: f64, beta_y: f64) -> f64 {
    match kind {
        LatticeKind::Linear => 2.0 * c * beta_x.cos(),
        LatticeKind::Square => 2.0 * c * (beta_x.cos() + beta_y.cos()),
        LatticeKind::Triangular => 2.0 * c * (beta_x.cos() + beta_y.cos() + (beta_x + beta_y).cos()),
    }
}

/// Transverse group velocities `(v_x, v_y)` in sites per unit length.
///
/// The triangular expression `−4c·sin β` is the derivative of `β_z` along
/// an axis with the other component at zero; off those lines it differs
/// from the full gradient. Its maximum `4c` is what bounds spreading.
pub fn group_velocity(kind: LatticeKind, c: f64, beta_x: f64, beta_y: f64) -> (f64, f64) {
    match kind {
        LatticeKind::Linear => (-2.0 * c * beta_x.sin(), 0.0),
        LatticeKind::Square => (-2.0 * c * beta_x.sin(), -2.0 * c * beta_y.sin()),
        LatticeKind::Triangular => (-4.0 * c * beta_x.sin(), -4.0 * c * beta_y.sin()),
    }
}

pub fn max_group_velocity(kind: LatticeKind, c: f64) -> f64 {
    match kind {
        LatticeKind::Linear | LatticeKind::Square => 2.0 * c,
        LatticeKind::Triangular => 4.0 * c,
    }
}

/// Shortest array that lets light from any input reach any output:
/// `m/(2c)` for the linear chain, `B√m/|v|_max` for the 2D lattices.
pub fn min_spread_length(kind: LatticeKind, m: usize, c: f64, b: f64) -> Result<f64> {
    check_modes(m)?;
    check_positive("c", c)?;
    let v = max_group_velocity(kind, c);
    Ok(match kind {
        LatticeKind::Linear => m as f64 / v,
        LatticeKind::Square | LatticeKind::Triangular => {
            check_positive("b", b)?;
            b * (m as f64).sqrt() / v
        }
    })
}

/// Fan-in/out S-bend length for the largest lateral offset: half the
/// fibre-array width, `p_F(m−1)/2` on a line or `p_F(⌈√m⌉−1)/2` on a grid.
pub fn fan_length(m: usize, r_min: f64, p_f: f64, arrangement: FanArrangement) -> Result<f64> {
    check_modes(m)?;
    check_positive("p_f", p_f)?;
    let span = match arrangement {
        FanArrangement::Linear => m - 1,
        FanArrangement::Grid => ceil_sqrt(m) - 1,
    };
    sbend_length(r_min, p_f * span as f64 / 2.0)
}

fn ceil_sqrt(m: usize) -> usize {
    let mut s = (m as f64).sqrt() as usize;
    while s * s < m {
        s += 1;
    }
    while s > 0 && (s - 1) * (s - 1) >= m {
        s -= 1;
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayoutRow {
    pub m: usize,
    pub clements: f64,
    pub planar: f64,
    pub lattice: f64,
    pub fan: f64,
}

impl LayoutRow {
    /// Lattice section plus fan-in and fan-out.
    pub fn lattice_total(&self) -> f64 {
        self.lattice + 2.0 * self.fan
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutComparison {
    pub rows: Vec<LayoutRow>,
    /// Log-log slope of the Clements length against `m`.
    pub clements_slope: f64,
    /// Log-log slope of the 2D-lattice spreading length against `m`.
    pub lattice_slope: f64,
}

impl LayoutComparison {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("m,clements_mm,planar_mm,lattice_mm,fan_mm,lattice_total_mm\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{:.6},{:.6},{:.6},{:.6},{:.6}",
                r.m,
                r.clements,
                r.planar,
                r.lattice,
                r.fan,
                r.lattice_total()
            );
        }
        out
    }
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::Domain("log-log fit needs at least 2 paired points".into()));
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0)) {
        return Err(Error::Domain("log-log fit needs positive values".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Domain("log-log fit needs distinct x values".into()));
    }
    Ok(sxy / sxx)
}

/// Length table over `modes`, with `params.m` ignored; the lattice column
/// uses `params.lattice_kind` (a 2D kind gives the √m law).
pub fn compare_layouts(modes: &[usize], params: &FootprintParams) -> Result<LayoutComparison> {
    params.validate()?;
    let rows = modes
        .iter()
        .map(|&m| {
            Ok(LayoutRow {
                m,
                clements: clements_length(m, params.r_min, params.pitch, params.c_clements)?,
                planar: min_spread_length(LatticeKind::Linear, m, params.c_lattice, params.b)?,
                lattice: min_spread_length(params.lattice_kind, m, params.c_lattice, params.b)?,
                fan: fan_length(m, params.r_min, params.fiber_pitch, params.fan_arrangement)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = rows.iter().map(|r| r.m as f64).collect();
    let clements: Vec<f64> = rows.iter().map(|r| r.clements).collect();
    let lattice: Vec<f64> = rows.iter().map(|r| r.lattice).collect();
    Ok(LayoutComparison { clements_slope: loglog_slope(&xs, &clements)?, lattice_slope: loglog_slope(&xs, &lattice)?, rows })
}

/// Powers of two from 8 to 1024.
pub fn default_mode_range() -> Vec<usize> {
    (3..=10).map(|k| 1usize << k).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn sbend() {
        assert_relative_eq!(sbend_length(30.0, 0.06).unwrap(), PI / 2.0 * 3.6f64.sqrt(), epsilon = 1e-12);
        assert_eq!(sbend_length(30.0, 0.0).unwrap(), 0.0);
        let a = sbend_length(10.0, 0.1).unwrap();
        assert_relative_eq!(sbend_length(10.0, 0.4).unwrap(), 2.0 * a, epsilon = 1e-12);
        assert!(sbend_length(30.0, -1.0).is_err());
    }

    #[test]
    fn couplers() {
        let l = coupler_length(1.0).unwrap();
        assert_relative_eq!(l, PI / 2.0, epsilon = 1e-15);
        assert_relative_eq!(coupler_reflectivity(1.0, l, 0.0), 1.0, epsilon = 1e-15);
        assert_eq!(coupler_reflectivity(1.0, 0.0, 0.0), 0.0);
        assert!(coupler_length(0.0).is_err());
    }

    #[test]
    fn clements() {
        let inc = clements_increment(30.0, 0.06, 1.0).unwrap();
        assert!((inc - 4.55).abs() < 0.005, "{inc}");
        let l2 = clements_length(2, 30.0, 0.06, 1.0).unwrap();
        assert_relative_eq!(l2, sbend_length(30.0, 0.06).unwrap() + 2.0 * coupler_length(1.0).unwrap(), epsilon = 1e-12);
        let l32 = clements_length(32, 30.0, 0.06, 1.0).unwrap();
        assert!((l32 - 142.6).abs() < 0.1, "{l32}");
        let l33 = clements_length(33, 30.0, 0.06, 1.0).unwrap();
        assert_relative_eq!(l33 - l32, inc, epsilon = 1e-12);
        assert!(clements_length(1, 30.0, 0.06, 1.0).is_err());
    }

    fn fd(f: impl Fn(f64) -> f64, x: f64) -> f64 {
        let h = 1e-6;
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    #[test]
    fn group_velocity_is_the_dispersion_slope() {
        let c = 0.7;
        for &b in &[-2.5, -0.4, 0.0, 0.9, 1.6, 3.0] {
            let (vx, _) = group_velocity(LatticeKind::Linear, c, b, 0.0);
            assert!((vx - fd(|x| dispersion(LatticeKind::Linear, c, x, 0.0), b)).abs() < 1e-8);
            for &by in &[-1.0, 0.3, 2.0] {
                let (vx, vy) = group_velocity(LatticeKind::Square, c, b, by);
                assert!((vx - fd(|x| dispersion(LatticeKind::Square, c, x, by), b)).abs() < 1e-8);
                assert!((vy - fd(|y| dispersion(LatticeKind::Square, c, b, y), by)).abs() < 1e-8);
            }
            // the triangular expression holds on the axes
            let (vx, _) = group_velocity(LatticeKind::Triangular, c, b, 0.0);
            assert!((vx - fd(|x| dispersion(LatticeKind::Triangular, c, x, 0.0), b)).abs() < 1e-8);
            let (_, vy) = group_velocity(LatticeKind::Triangular, c, 0.0, b);
            assert!((vy - fd(|y| dispersion(LatticeKind::Triangular, c, 0.0, y), b)).abs() < 1e-8);
        }
    }

    #[test]
    fn velocity_extremes() {
        let c = 0.2;
        assert_eq!(dispersion(LatticeKind::Linear, c, 0.0, 0.0), 2.0 * c);
        assert_eq!(group_velocity(LatticeKind::Linear, c, 0.0, 0.0).0, 0.0);
        assert_relative_eq!(group_velocity(LatticeKind::Linear, c, FRAC_PI_2, 0.0).0.abs(), 2.0 * c);
        let tri = group_velocity(LatticeKind::Triangular, c, FRAC_PI_2, 0.0).0.abs();
        assert_relative_eq!(tri, 2.0 * max_group_velocity(LatticeKind::Linear, c));
    }

    #[test]
    fn spreading_lengths() {
        assert_relative_eq!(min_spread_length(LatticeKind::Linear, 32, 0.2, 2.0).unwrap(), 80.0, epsilon = 1e-12);
        let tri = min_spread_length(LatticeKind::Triangular, 32, 0.2, 2.0).unwrap();
        assert!((tri - 14.1).abs() < 0.05, "{tri}");
        let sq = min_spread_length(LatticeKind::Square, 32, 0.2, 2.0).unwrap();
        assert_relative_eq!(sq, 2.0 * tri, epsilon = 1e-12);
        assert!(min_spread_length(LatticeKind::Linear, 1, 0.2, 2.0).is_err());
    }

    #[test]
    fn fans() {
        let lin = fan_length(32, 30.0, 0.127, FanArrangement::Linear).unwrap();
        assert_relative_eq!(lin, PI / 2.0 * (31.0f64 * 30.0 * 0.127).sqrt(), epsilon = 1e-12);
        assert!((lin - 17.1).abs() < 0.05);
        let grid = fan_length(32, 30.0, 0.25, FanArrangement::Grid).unwrap();
        assert_relative_eq!(grid, sbend_length(30.0, 0.625).unwrap(), epsilon = 1e-12);
        assert!((grid - 9.6).abs() < 0.05, "{grid}");
        assert_relative_eq!(
            fan_length(2, 30.0, 0.127, FanArrangement::Linear).unwrap(),
            PI / 2.0 * (30.0f64 * 0.127).sqrt(),
            epsilon = 1e-12
        );
        assert_eq!((1..=17).map(ceil_sqrt).collect::<Vec<_>>(), vec![1, 2, 2, 2, 3, 3, 3, 3, 3, 4, 4, 4, 4, 4, 4, 4, 5]);
    }

    #[test]
    fn layout_table() {
        let params = FootprintParams { fiber_pitch: 0.25, ..FootprintParams::default() };
        let cmp = compare_layouts(&default_mode_range(), &params).unwrap();
        assert!((cmp.clements_slope - 1.0).abs() < 0.02, "{}", cmp.clements_slope);
        assert!((cmp.lattice_slope - 0.5).abs() < 0.02, "{}", cmp.lattice_slope);
        for w in cmp.rows.windows(2) {
            let (a, b) = (w[0], w[1]);
            assert!(b.clements >= a.clements && b.planar >= a.planar && b.lattice >= a.lattice && b.fan >= a.fan);
        }
        let at32 = compare_layouts(&[32], &params).map(|c| c.rows[0]);
        assert!(at32.is_err(), "a single point has no slope");
        let row = compare_layouts(&[16, 32], &params).unwrap().rows[1];
        assert!(row.lattice_total() < row.clements / 2.0);
        let csv = cmp.to_csv();
        assert!(csv.starts_with("m,clements_mm,"));
        assert_eq!(csv.lines().count(), cmp.rows.len() + 1);
    }

    #[test]
    fn loglog_of_a_power_law() {
        let xs: Vec<f64> = (1..10).map(|k| k as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x.powf(1.7)).collect();
        assert_relative_eq!(loglog_slope(&xs, &ys).unwrap(), 1.7, epsilon = 1e-12);
    }
}
