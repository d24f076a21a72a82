//! Array geometry: element placement on the uniform planar array and
//! distance/angle bookkeeping between elements and terminals.
//!
//! Convention used throughout the crate: the array lies in the xOy plane
//! with its geometric center at the origin. The top face (normal +z) is the
//! reflection face; the transmitter and the reflection receiver live at
//! z > 0, the transmission receiver at z < 0. Angles are radians internally,
//! degrees only at file/CLI boundaries.

use crate::error::{Error, Result};

/// A 3-D point or vector in meters.
pub type Vec3 = [f64; 3];

/// Which face of the surface a signal path belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    /// Through the surface, toward z < 0.
    Transmit,
    /// Back from the surface, toward z > 0.
    Reflect,
}

impl Side {
    /// Sign of the z half-space served by this side.
    pub fn z_sign(self) -> f64 {
        match self {
            Side::Transmit => -1.0,
            Side::Reflect => 1.0,
        }
    }

    /// Short lowercase label used in reports and exports.
    pub fn label(self) -> &'static str {
        match self {
            Side::Transmit => "transmit",
            Side::Reflect => "reflect",
        }
    }
}

/// Rectangular element grid with fixed pitch.
///
/// `n_rows` counts elements along the row index (y direction), `n_cols`
/// along the column index (x direction). The element pitch along x is
/// `pitch_x` and along y `pitch_y`; the grid is centered on the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayLayout {
    n_rows: usize,
    n_cols: usize,
    pitch_x: f64,
    pitch_y: f64,
}

impl ArrayLayout {
    pub fn new(n_rows: usize, n_cols: usize, pitch_x: f64, pitch_y: f64) -> Result<Self> {
        if n_rows < 1 || n_cols < 1 {
            return Err(Error::InvalidParameter(format!(
                "layout must have at least one row and one column, got {n_rows}x{n_cols}"
            )));
        }
        if !(pitch_x > 0.0) || !(pitch_y > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "element pitch must be positive, got ({pitch_x}, {pitch_y}) m"
            )));
        }
        Ok(Self {
            n_rows,
            n_cols,
            pitch_x,
            pitch_y,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn pitch_x(&self) -> f64 {
        self.pitch_x
    }

    pub fn pitch_y(&self) -> f64 {
        self.pitch_y
    }

    /// Total element count.
    pub fn n_elements(&self) -> usize {
        self.n_rows * self.n_cols
    }

    /// Position of the element at 1-based `(row, col)`.
    ///
    /// The column offset pairs with the x pitch and the row offset with the
    /// y pitch; rows count downward so that row 1 sits at the largest y.
    pub fn element_position(&self, row: usize, col: usize) -> Result<Vec3> {
        if row < 1 || row > self.n_rows {
            return Err(Error::IndexOutOfRange {
                name: "row",
                got: row,
                max: self.n_rows,
            });
        }
        if col < 1 || col > self.n_cols {
            return Err(Error::IndexOutOfRange {
                name: "col",
                got: col,
                max: self.n_cols,
            });
        }
        let delta_col = col as f64 - (self.n_cols as f64 + 1.0) / 2.0;
        let delta_row = (self.n_rows as f64 + 1.0) / 2.0 - row as f64;
        Ok([delta_col * self.pitch_x, delta_row * self.pitch_y, 0.0])
    }

    /// All element positions in row-major order (row 1 col 1, row 1 col 2, ...).
    pub fn positions(&self) -> Vec<Vec3> {
        let mut out = Vec::with_capacity(self.n_elements());
        for row in 1..=self.n_rows {
            for col in 1..=self.n_cols {
                // indices validated by construction
                out.push(self.element_position(row, col).expect("in-bounds index"));
            }
        }
        out
    }
}

/// A terminal (transmitter or receiver) position relative to the array
/// center, kept in Cartesian form with spherical accessors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TerminalPosition {
    cartesian: Vec3,
}

impl TerminalPosition {
    pub fn from_cartesian(x: f64, y: f64, z: f64) -> Self {
        Self {
            cartesian: [x, y, z],
        }
    }

    /// Build from spherical coordinates: range from the array center,
    /// zenith from the +z axis, azimuth from the +x axis.
    pub fn from_spherical(range: f64, zenith: f64, azimuth: f64) -> Self {
        let (sin_z, cos_z) = zenith.sin_cos();
        let (sin_a, cos_a) = azimuth.sin_cos();
        Self {
            cartesian: [range * sin_z * cos_a, range * sin_z * sin_a, range * cos_z],
        }
    }

    pub fn cartesian(&self) -> Vec3 {
        self.cartesian
    }

    pub fn x(&self) -> f64 {
        self.cartesian[0]
    }

    pub fn y(&self) -> f64 {
        self.cartesian[1]
    }

    pub fn z(&self) -> f64 {
        self.cartesian[2]
    }

    /// Distance from the array center.
    pub fn range(&self) -> f64 {
        let [x, y, z] = self.cartesian;
        (x * x + y * y + z * z).sqrt()
    }

    /// Zenith angle from the +z axis, in [0, pi].
    pub fn zenith(&self) -> f64 {
        let r = self.range();
        if r == 0.0 {
            return 0.0;
        }
        (self.cartesian[2] / r).clamp(-1.0, 1.0).acos()
    }

    /// Azimuth angle from the +x axis, in [0, 2*pi).
    pub fn azimuth(&self) -> f64 {
        let a = self.cartesian[1].atan2(self.cartesian[0]);
        if a < 0.0 {
            a + std::f64::consts::TAU
        } else {
            a
        }
    }

    /// Which half-space the terminal occupies, `None` if it lies in the
    /// array plane.
    pub fn side(&self) -> Option<Side> {
        if self.cartesian[2] > 0.0 {
            Some(Side::Reflect)
        } else if self.cartesian[2] < 0.0 {
            Some(Side::Transmit)
        } else {
            None
        }
    }
}

/// Euclidean distance and departure zenith between an element and a
/// terminal.
///
/// The zenith is measured from the outward face normal on the terminal's
/// side of the surface (+z for z > 0, -z for z < 0), so a terminal on the
/// boresight of either face reports zenith 0.
pub fn link_geometry(element_pos: Vec3, terminal: &TerminalPosition) -> Result<(f64, f64)> {
    let [ex, ey, ez] = element_pos;
    let [tx, ty, tz] = terminal.cartesian();
    let d = [tx - ex, ty - ey, tz - ez];
    let distance = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    if distance == 0.0 {
        return Err(Error::DegenerateGeometry(format!(
            "terminal coincides with element at ({ex}, {ey}, {ez})"
        )));
    }
    let normal_z = if tz < 0.0 { -1.0 } else { 1.0 };
    let cos_zenith = (d[2] * normal_z / distance).clamp(-1.0, 1.0);
    Ok((distance, cos_zenith.acos()))
}
