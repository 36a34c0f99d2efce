//! Triangle embedding of sentiment triples.
//!
//! Each proportion of a [`SentimentTriple`] is scaled along a fixed span
//! line in the plane, turning the triple into three vertices of a triangle.
//! Two direction schemes are supported (see [`AngleMode`]); everything
//! downstream (side lengths, area, angle, height) is plain Euclidean
//! geometry over those vertices.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::sentiment::SentimentTriple;

/// A point or displacement in the plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn dot(self, rhs: Vec2) -> f64 {
        self.x * rhs.x + self.y * rhs.y
    }

    /// z-component of the 3-D cross product of two in-plane vectors.
    pub fn cross(self, rhs: Vec2) -> f64 {
        self.x * rhs.y - self.y * rhs.x
    }

    pub fn norm(self) -> f64 {
        (self.x * self.x + self.y * self.y).sqrt()
    }

    fn scale(self, k: f64) -> Vec2 {
        Vec2::new(k * self.x, k * self.y)
    }
}

impl std::ops::Sub for Vec2 {
    type Output = Vec2;

    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

/// Direction scheme for the three span lines.
///
/// `Paper` places pos on the positive y-axis and neg / neu on the
/// diagonals at -45 and 225 degrees. `Equilateral` spaces the three
/// directions a full 120 degrees apart (90, -30, 210 degrees), for
/// sensitivity checks against the asymmetric default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AngleMode {
    #[default]
    Paper,
    Equilateral,
}

// Unit direction constants; sqrt is exactly rounded, so these are
// bit-identical across platforms (no libm trig in the pipeline path).
const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

impl AngleMode {
    /// Unit direction vectors for (pos, neu, neg), in that order.
    pub fn directions(self) -> [Vec2; 3] {
        match self {
            AngleMode::Paper => [
                Vec2::new(0.0, 1.0),
                Vec2::new(-FRAC_1_SQRT_2, -FRAC_1_SQRT_2),
                Vec2::new(FRAC_1_SQRT_2, -FRAC_1_SQRT_2),
            ],
            AngleMode::Equilateral => {
                let h = 3f64.sqrt() / 2.0;
                [
                    Vec2::new(0.0, 1.0),
                    Vec2::new(-h, -0.5),
                    Vec2::new(h, -0.5),
                ]
            }
        }
    }
}

impl fmt::Display for AngleMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AngleMode::Paper => write!(f, "paper"),
            AngleMode::Equilateral => write!(f, "equilateral"),
        }
    }
}

impl FromStr for AngleMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "paper" => Ok(AngleMode::Paper),
            "equilateral" => Ok(AngleMode::Equilateral),
            other => Err(format!(
                "unknown angle mode {other:?} (expected paper or equilateral)"
            )),
        }
    }
}

/// The three triangle vertices obtained by scaling each proportion along
/// its span line. Each vertex sits at distance equal to its proportion
/// from the origin, and `pos` lies on the positive y-axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriangleEmbedding {
    pub p_pos: Vec2,
    pub p_neu: Vec2,
    pub p_neg: Vec2,
    pub angle_mode: AngleMode,
}

/// Euclidean side lengths of the embedded triangle:
/// `a = |neu - pos|`, `b = |neu - neg|`, `c = |pos - neg|`.
///
/// For vertices produced by [`embed`] the triangle inequality holds up to
/// floating-point slack and every side is at most 2, since each vertex is
/// within unit distance of the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SideLengths {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl SideLengths {
    /// The longest side, used as the base when deriving the height.
    pub fn longest(&self) -> f64 {
        self.a.max(self.b).max(self.c)
    }
}

/// Embeds a triple as three vertices on the span lines of `mode`.
pub fn embed(triple: SentimentTriple, mode: AngleMode) -> TriangleEmbedding {
    let [d_pos, d_neu, d_neg] = mode.directions();
    TriangleEmbedding {
        p_pos: d_pos.scale(triple.pos()),
        p_neu: d_neu.scale(triple.neu()),
        p_neg: d_neg.scale(triple.neg()),
        angle_mode: mode,
    }
}

/// Side lengths of an embedded triangle.
pub fn side_lengths(emb: &TriangleEmbedding) -> SideLengths {
    SideLengths {
        a: (emb.p_neu - emb.p_pos).norm(),
        b: (emb.p_neu - emb.p_neg).norm(),
        c: (emb.p_pos - emb.p_neg).norm(),
    }
}
