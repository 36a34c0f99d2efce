//! Per-review feature derivation: area, weighted angle, height, omega.
//!
//! From the embedded triangle we derive four scalars per review:
//!
//! * `alpha` — triangle area via Heron's formula,
//! * `beta`  — arccos of the inner product of the two edges meeting at
//!   the neu vertex, weighted by their magnitude ratio,
//! * `gamma` — the height over the longest side,
//! * `omega` — `ln(alpha^beta + epsilon)` reduced modulo `e^gamma`
//!   (floored modulus, so the result always lies in `[0, e^gamma)`).
//!
//! The review is then projected to the separation space `[a, c, omega]`.
//! All singular configurations (collapsed vertices, zero area, arccos
//! arguments pushed out of domain by rounding) resolve to defined values
//! and raise a flag instead of erroring, since real review corpora hit
//! every one of these edges.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{embed, side_lengths, AngleMode, SideLengths, TriangleEmbedding};
use crate::sentiment::SentimentTriple;

/// How far below zero the Heron radicand may drift on planar input
/// before it stops looking like rounding and starts looking like a bug.
const RADICAND_SLACK: f64 = 1e-12;

/// Below this, a vector norm is treated as zero.
const NORM_EPS: f64 = 1e-12;

/// Default epsilon inside `ln(alpha^beta + epsilon)`: far below the
/// feature-space scale (sides are at most 2) and far above double-precision
/// noise at the logarithm's argument.
pub const DEFAULT_EPSILON: f64 = 1e-12;

/// Guard flags raised while deriving features. Each flag records that one
/// specific singularity guard decided a value.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FeatureFlags {
    /// Triangle collapsed: Heron radicand at or below zero, or all sides zero.
    pub degenerate_triangle: bool,
    /// The arccos argument fell outside [-1, 1] and was clamped.
    pub arccos_clamped: bool,
    /// `neu - pos` had zero length; beta defaulted to pi/2.
    pub zero_u_vector: bool,
    /// Zero area reached the omega computation; `alpha^beta` was decided
    /// by the zero-area guard (0 for beta > 0, 1 for beta = 0).
    pub alpha_zero: bool,
}

type FlagGetter = fn(&FeatureFlags) -> bool;

const FLAG_NAMES: [(&str, FlagGetter); 4] = [
    ("degenerate_triangle", |f| f.degenerate_triangle),
    ("arccos_clamped", |f| f.arccos_clamped),
    ("zero_u_vector", |f| f.zero_u_vector),
    ("alpha_zero", |f| f.alpha_zero),
];

impl FeatureFlags {
    pub fn is_empty(&self) -> bool {
        !(self.degenerate_triangle || self.arccos_clamped || self.zero_u_vector || self.alpha_zero)
    }

    /// Serializes to a stable `|`-separated list, empty string when clear.
    pub fn encode(&self) -> String {
        let mut out = String::new();
        for (name, get) in FLAG_NAMES {
            if get(self) {
                if !out.is_empty() {
                    out.push('|');
                }
                out.push_str(name);
            }
        }
        out
    }

    /// Parses the `|`-separated encoding produced by [`FeatureFlags::encode`].
    pub fn decode(s: &str) -> std::result::Result<Self, String> {
        let mut flags = FeatureFlags::default();
        if s.is_empty() {
            return Ok(flags);
        }
        for part in s.split('|') {
            match part {
                "degenerate_triangle" => flags.degenerate_triangle = true,
                "arccos_clamped" => flags.arccos_clamped = true,
                "zero_u_vector" => flags.zero_u_vector = true,
                "alpha_zero" => flags.alpha_zero = true,
                other => return Err(format!("unknown feature flag {other:?}")),
            }
        }
        Ok(flags)
    }
}

/// Flag occurrence counts across a run, reported in the manifest.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct FlagFrequencies {
    pub degenerate_triangle: u64,
    pub arccos_clamped: u64,
    pub zero_u_vector: u64,
    pub alpha_zero: u64,
}

impl FlagFrequencies {
    pub fn add(&mut self, flags: &FeatureFlags) {
        self.degenerate_triangle += flags.degenerate_triangle as u64;
        self.arccos_clamped += flags.arccos_clamped as u64;
        self.zero_u_vector += flags.zero_u_vector as u64;
        self.alpha_zero += flags.alpha_zero as u64;
    }
}

/// Knobs of the feature stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FeatureConfig {
    pub angle_mode: AngleMode,
    pub epsilon: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            angle_mode: AngleMode::Paper,
            epsilon: DEFAULT_EPSILON,
        }
    }
}

/// Everything derived for one review.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRecord {
    pub id: String,
    pub triple: SentimentTriple,
    pub sides: SideLengths,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub omega: f64,
    pub flags: FeatureFlags,
}

impl FeatureRecord {
    /// Projection to the separation space `[a, c, omega]`.
    pub fn vector(&self) -> FeatureVector {
        FeatureVector {
            a: self.sides.a,
            c: self.sides.c,
            omega: self.omega,
        }
    }
}

/// The projected point a review occupies in the clustering space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector {
    pub a: f64,
    pub c: f64,
    pub omega: f64,
}

/// Triangle area from side lengths via Heron's formula.
///
/// A radicand at or barely below zero (within `1e-12`) means the vertices
/// are collinear up to rounding: the area is 0 and `degenerate_triangle`
/// is flagged. A radicand further below zero cannot happen for sides taken
/// from planar points and is reported as an internal error.
pub fn heron_area(sides: &SideLengths, flags: &mut FeatureFlags) -> Result<f64> {
    let SideLengths { a, b, c } = *sides;
    let s = (a + b + c) / 2.0;
    let radicand = s * (s - a) * (s - b) * (s - c);
    if radicand <= 0.0 {
        if radicand < -RADICAND_SLACK {
            return Err(Error::internal(format!(
                "Heron radicand {radicand:e} below -{RADICAND_SLACK:e} for sides ({a}, {b}, {c})"
            )));
        }
        flags.degenerate_triangle = true;
        return Ok(0.0);
    }
    Ok(radicand.sqrt())
}

/// The magnitude-weighted angle at the neu vertex:
/// `beta = arccos((u . v) * |v| / |u|)` with `u = neu - pos`, `v = neu - neg`.
///
/// When `u` vanishes the argument's limit is 0, so beta is pi/2 and
/// `zero_u_vector` is flagged. Arguments nudged outside [-1, 1] by rounding
/// are clamped to the nearer endpoint and flagged `arccos_clamped`.
pub fn beta_angle(emb: &TriangleEmbedding, flags: &mut FeatureFlags) -> f64 {
    let u = emb.p_neu - emb.p_pos;
    let v = emb.p_neu - emb.p_neg;
    let u_norm = u.norm();
    if u_norm < NORM_EPS {
        flags.zero_u_vector = true;
        return std::f64::consts::FRAC_PI_2;
    }
    let t = u.dot(v) * v.norm() / u_norm;
    if t > 1.0 {
        flags.arccos_clamped = true;
        return 0.0;
    }
    if t < -1.0 {
        flags.arccos_clamped = true;
        return std::f64::consts::PI;
    }
    t.acos()
}

/// Height of the triangle over its longest side: `2 * alpha / max(a, b, c)`.
///
/// All three sides vanish only when the triangle collapses onto the origin;
/// that case returns 0 with `degenerate_triangle` flagged.
pub fn gamma_height(sides: &SideLengths, alpha: f64, flags: &mut FeatureFlags) -> f64 {
    let longest = sides.longest();
    if longest < NORM_EPS {
        flags.degenerate_triangle = true;
        return 0.0;
    }
    2.0 * alpha / longest
}

/// Floored modulus: the remainder of `x / m` in `[0, m)` for `m > 0`.
fn floored_mod(x: f64, m: f64) -> f64 {
    let mut r = x - m * (x / m).floor();
    if r < 0.0 {
        r += m;
    }
    if r >= m {
        // x was a multiple of m up to rounding
        r = 0.0;
    }
    r
}

/// The omega feature: `ln(alpha^beta + epsilon)` reduced into `[0, e^gamma)`
/// by floored modulus.
///
/// `alpha^beta` is computed as `exp(beta * ln(alpha))` with the zero-area
/// cases decided explicitly: `0^beta = 0` for `beta > 0` (so the logarithm
/// falls back to `ln(epsilon)`) and `0^0 = 1` by continuation. Both zero-area
/// branches flag `alpha_zero`.
pub fn omega(alpha: f64, beta: f64, gamma: f64, epsilon: f64, flags: &mut FeatureFlags) -> Result<f64> {
    let x = if alpha == 0.0 {
        flags.alpha_zero = true;
        if beta > 0.0 {
            epsilon.ln()
        } else {
            (1.0 + epsilon).ln()
        }
    } else {
        ((beta * alpha.ln()).exp() + epsilon).ln()
    };
    let modulus = gamma.exp();
    if !x.is_finite() || !modulus.is_finite() {
        return Err(Error::internal(format!(
            "non-finite omega intermediate: x = {x}, e^gamma = {modulus} \
             (alpha = {alpha}, beta = {beta}, gamma = {gamma}, epsilon = {epsilon})"
        )));
    }
    Ok(floored_mod(x, modulus))
}

/// Derives the full feature record for one review.
pub fn compute(id: impl Into<String>, triple: SentimentTriple, cfg: &FeatureConfig) -> Result<FeatureRecord> {
    let emb = embed(triple, cfg.angle_mode);
    let sides = side_lengths(&emb);
    let mut flags = FeatureFlags::default();
    let alpha = heron_area(&sides, &mut flags)?;
    let beta = beta_angle(&emb, &mut flags);
    let gamma = gamma_height(&sides, alpha, &mut flags);
    let omega = omega(alpha, beta, gamma, cfg.epsilon, &mut flags)?;
    Ok(FeatureRecord {
        id: id.into(),
        triple,
        sides,
        alpha,
        beta,
        gamma,
        omega,
        flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec2;
    use proptest::prelude::*;

    const FRAC_PI_2: f64 = std::f64::consts::FRAC_PI_2;

    fn triple(pos: f64, neu: f64, neg: f64) -> SentimentTriple {
        SentimentTriple::new(pos, neu, neg).unwrap()
    }

    fn shoelace(emb: &TriangleEmbedding) -> f64 {
        (emb.p_neg - emb.p_pos).cross(emb.p_neu - emb.p_pos).abs() / 2.0
    }

    #[test]
    fn heron_right_triangle() {
        let mut flags = FeatureFlags::default();
        let sides = SideLengths { a: 3.0, b: 4.0, c: 5.0 };
        assert!((heron_area(&sides, &mut flags).unwrap() - 6.0).abs() < 1e-12);
        assert!(flags.is_empty());
    }

    #[test]
    fn heron_degenerate_sides() {
        let mut flags = FeatureFlags::default();
        let sides = SideLengths { a: 1.0, b: 0.0, c: 1.0 };
        assert_eq!(heron_area(&sides, &mut flags).unwrap(), 0.0);
        assert!(flags.degenerate_triangle);
    }

    #[test]
    fn heron_rejects_impossible_sides() {
        let mut flags = FeatureFlags::default();
        let sides = SideLengths { a: 10.0, b: 1.0, c: 1.0 };
        assert!(heron_area(&sides, &mut flags).is_err());
    }

    #[test]
    fn heron_matches_shoelace_on_uniform_triple() {
        // frozen from a 50-digit evaluation of the definitions
        let emb = embed(triple(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0), AngleMode::Paper);
        let sides = side_lengths(&emb);
        let mut flags = FeatureFlags::default();
        let alpha = heron_area(&sides, &mut flags).unwrap();
        assert!((alpha - 0.13412297568739417).abs() < 1e-12);
        assert!((alpha - shoelace(&emb)).abs() < 1e-12);
    }

    #[test]
    fn beta_of_pure_positive_is_right_angle() {
        let emb = embed(triple(1.0, 0.0, 0.0), AngleMode::Paper);
        let mut flags = FeatureFlags::default();
        let beta = beta_angle(&emb, &mut flags);
        assert!((beta - FRAC_PI_2).abs() < 1e-15);
        assert!(flags.is_empty()); // v = 0 makes the argument exactly 0; no guard fires
    }

    #[test]
    fn beta_zero_u_vector_defaults_to_right_angle() {
        // pos = neu = 0 collapses u
        let emb = embed(triple(0.0, 0.0, 1.0), AngleMode::Paper);
        let mut flags = FeatureFlags::default();
        let beta = beta_angle(&emb, &mut flags);
        assert_eq!(beta, FRAC_PI_2);
        assert!(flags.zero_u_vector);
    }

    #[test]
    fn beta_clamps_out_of_domain_argument() {
        // hand-built vertices forcing t = (u.v)|v|/|u| slightly above 1
        let emb = TriangleEmbedding {
            p_pos: Vec2::new(0.0, 0.0),
            p_neu: Vec2::new(1.0, 0.0),
            p_neg: Vec2::new(-5e-9, 0.0),
            angle_mode: AngleMode::Paper,
        };
        let mut flags = FeatureFlags::default();
        let beta = beta_angle(&emb, &mut flags);
        assert_eq!(beta, 0.0);
        assert!(flags.arccos_clamped);

        let emb = TriangleEmbedding {
            p_pos: Vec2::new(0.0, 0.0),
            p_neu: Vec2::new(-1.0, 0.0),
            p_neg: Vec2::new(-2.0 - 5e-9, 0.0),
            angle_mode: AngleMode::Paper,
        };
        let mut flags = FeatureFlags::default();
        let beta = beta_angle(&emb, &mut flags);
        assert_eq!(beta, std::f64::consts::PI);
        assert!(flags.arccos_clamped);
    }

    #[test]
    fn beta_of_uniform_triple() {
        // frozen from a 50-digit evaluation of the definitions
        let emb = embed(triple(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0), AngleMode::Paper);
        let mut flags = FeatureFlags::default();
        let beta = beta_angle(&emb, &mut flags);
        assert!((beta - 1.485652727533622).abs() < 1e-12);
        assert!(flags.is_empty());
    }

    #[test]
    fn gamma_direct_formula() {
        let mut flags = FeatureFlags::default();
        let sides = SideLengths { a: 3.0, b: 4.0, c: 5.0 };
        assert!((gamma_height(&sides, 6.0, &mut flags) - 2.4).abs() < 1e-15);
        assert!(flags.is_empty());
    }

    #[test]
    fn gamma_zero_area_and_collapsed_triangle() {
        let mut flags = FeatureFlags::default();
        let sides = SideLengths { a: 1.0, b: 0.0, c: 1.0 };
        assert_eq!(gamma_height(&sides, 0.0, &mut flags), 0.0);
        assert!(flags.is_empty()); // longest side is healthy, no degeneracy here

        let mut flags = FeatureFlags::default();
        let sides = SideLengths { a: 0.0, b: 0.0, c: 0.0 };
        assert_eq!(gamma_height(&sides, 0.0, &mut flags), 0.0);
        assert!(flags.degenerate_triangle);
    }

    #[test]
    fn gamma_of_uniform_triple() {
        // frozen from a 50-digit evaluation of the definitions
        let emb = embed(triple(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0), AngleMode::Paper);
        let sides = side_lengths(&emb);
        let mut flags = FeatureFlags::default();
        let alpha = heron_area(&sides, &mut flags).unwrap();
        let gamma = gamma_height(&sides, alpha, &mut flags);
        assert!((gamma - 0.4355209882921255).abs() < 1e-12);
    }

    #[test]
    fn omega_zero_alpha_positive_beta() {
        // frozen: ln(1e-12) = -27.6310211159285482..., floored mod 1
        let mut flags = FeatureFlags::default();
        let w = omega(0.0, FRAC_PI_2, 0.0, 1e-12, &mut flags).unwrap();
        assert!((w - 0.3689788840714518).abs() < 1e-12);
        assert!(flags.alpha_zero);
    }

    #[test]
    fn omega_unit_alpha() {
        let mut flags = FeatureFlags::default();
        let w = omega(1.0, 2.3, 0.0, 1e-12, &mut flags).unwrap();
        assert!((w - 1e-12).abs() < 1e-13);
        assert!(flags.is_empty());
    }

    #[test]
    fn omega_zero_alpha_zero_beta_uses_continuation() {
        let mut flags = FeatureFlags::default();
        let w = omega(0.0, 0.0, 0.0, 1e-12, &mut flags).unwrap();
        assert!((w - 1e-12).abs() < 1e-13);
        assert!(flags.alpha_zero);
    }

    #[test]
    fn omega_of_uniform_triple() {
        // frozen from a 50-digit evaluation of the definitions
        let rec = compute("x", triple(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0), &FeatureConfig::default())
            .unwrap();
        assert!((rec.omega - 0.10686274050081105).abs() < 1e-12);
        assert!(rec.flags.is_empty());
    }

    #[test]
    fn half_half_zero_case() {
        // frozen from a 50-digit evaluation of the definitions
        let rec = compute("x", triple(0.5, 0.5, 0.0), &FeatureConfig::default()).unwrap();
        assert!((rec.sides.a - 0.9238795325112868).abs() < 1e-12);
        assert!((rec.sides.b - 0.5).abs() < 1e-12);
        assert!((rec.sides.c - 0.5).abs() < 1e-12);
        assert!((rec.alpha - 0.08838834764831844).abs() < 1e-12);
        assert!((rec.beta - 1.3377219249890487).abs() < 1e-12);
        assert!((rec.gamma - 0.1913417161825449).abs() < 1e-12);
        assert!((rec.omega - 0.38728583668309).abs() < 1e-12);
        assert!(rec.flags.is_empty());
    }

    #[test]
    fn feature_vector_projection() {
        let rec = compute("x", triple(1.0, 0.0, 0.0), &FeatureConfig::default()).unwrap();
        let v = rec.vector();
        assert_eq!((v.a, v.c), (1.0, 1.0));
        assert!((v.omega - 0.3689788840714518).abs() < 1e-12);
        assert!(rec.flags.degenerate_triangle);
        assert!(rec.flags.alpha_zero);
    }

    #[test]
    fn flags_encode_decode_round_trip() {
        let flags = FeatureFlags {
            degenerate_triangle: true,
            arccos_clamped: false,
            zero_u_vector: true,
            alpha_zero: true,
        };
        let enc = flags.encode();
        assert_eq!(enc, "degenerate_triangle|zero_u_vector|alpha_zero");
        assert_eq!(FeatureFlags::decode(&enc).unwrap(), flags);
        assert_eq!(FeatureFlags::decode("").unwrap(), FeatureFlags::default());
        assert!(FeatureFlags::decode("bogus").is_err());
    }

    #[test]
    fn floored_mod_range() {
        assert!((floored_mod(-27.631021115928547, 1.0) - 0.3689788840714518).abs() < 1e-12);
        assert_eq!(floored_mod(0.0, 1.0), 0.0);
        assert!((floored_mod(3.5, 1.2) - 1.1).abs() < 1e-12);
        // a tiny negative dividend must not escape the [0, m) range
        let r = floored_mod(-1e-300, 1.0);
        assert!((0.0..1.0).contains(&r));
    }

    fn simplex_strategy() -> impl Strategy<Value = SentimentTriple> {
        (0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0)
            .prop_filter("sum > 0", |(a, b, c)| a + b + c > 1e-6)
            .prop_map(|(a, b, c)| {
                let sum = a + b + c;
                SentimentTriple::from_raw([a / sum, b / sum, c / sum], 1e-6)
                    .expect("normalized point lies on the simplex")
            })
    }

    proptest! {
        #[test]
        fn heron_equals_shoelace(t in simplex_strategy()) {
            let emb = embed(t, AngleMode::Paper);
            let sides = side_lengths(&emb);
            let mut flags = FeatureFlags::default();
            let alpha = heron_area(&sides, &mut flags).unwrap();
            prop_assert!((alpha - shoelace(&emb)).abs() < 1e-9);
        }

        #[test]
        fn omega_stays_in_range(t in simplex_strategy()) {
            let rec = compute("p", t, &FeatureConfig::default()).unwrap();
            prop_assert!(rec.omega >= 0.0);
            prop_assert!(rec.omega < rec.gamma.exp());
        }

        #[test]
        fn gamma_bounded_by_non_longest_sides(t in simplex_strategy()) {
            let rec = compute("p", t, &FeatureConfig::default()).unwrap();
            let mut sides = [rec.sides.a, rec.sides.b, rec.sides.c];
            sides.sort_by(|x, y| x.partial_cmp(y).unwrap());
            // the height over the longest base never exceeds either other side
            prop_assert!(rec.gamma <= sides[0] + 1e-9);
            prop_assert!(rec.gamma <= sides[1] + 1e-9);
        }

        #[test]
        fn beta_within_zero_and_pi(t in simplex_strategy()) {
            let rec = compute("p", t, &FeatureConfig::default()).unwrap();
            prop_assert!(rec.beta >= 0.0 && rec.beta <= std::f64::consts::PI);
            prop_assert!(rec.alpha >= 0.0 && rec.gamma >= 0.0);
        }

        #[test]
        fn compute_is_deterministic(t in simplex_strategy()) {
            let cfg = FeatureConfig::default();
            let r1 = compute("p", t, &cfg).unwrap();
            let r2 = compute("p", t, &cfg).unwrap();
            // bit-identical, not just approximately equal
            prop_assert_eq!(r1.alpha.to_bits(), r2.alpha.to_bits());
            prop_assert_eq!(r1.beta.to_bits(), r2.beta.to_bits());
            prop_assert_eq!(r1.gamma.to_bits(), r2.gamma.to_bits());
            prop_assert_eq!(r1.omega.to_bits(), r2.omega.to_bits());
            prop_assert_eq!(r1.flags, r2.flags);
        }
    }
}
