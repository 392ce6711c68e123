//! Hessian–Schatten total variation of radial functions `f(x) = g(|x|)`.
//!
//! A profile `g` is stored as a list of pieces, each a finite sum of real
//! powers `c·s^a`, together with the jumps of `g'` at the breakpoints. The
//! variation over a ball `B_r` splits into an atomic part carried by the
//! spheres where `g'` jumps and an absolutely continuous part
//!
//! ```text
//! d·ω_d · ∫_0^r ‖(s g''(s), g'(s), …, g'(s))‖_p s^{d−2} ds
//! ```
//!
//! with `g'` repeated `d − 1` times.

use crate::error::{Error, Result};
use crate::quadrature;
use crate::schatten::PExponent;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Smallest admissible monomial exponent.
pub const MIN_EXPONENT: f64 = -0.9;

/// Partial sums above this are reported as divergence.
const DIVERGENCE_CAP: f64 = 1e12;

/// Volume of the unit ball in R^d.
pub fn unit_ball_volume(d: usize) -> f64 {
    match d {
        0 => 1.0,
        1 => 2.0,
        2 => PI,
        3 => 4.0 * PI / 3.0,
        4 => PI * PI / 2.0,
        _ => {
            let mut k = if d % 2 == 0 { 4 } else { 3 };
            let mut v = unit_ball_volume(k);
            while k < d {
                k += 2;
                v *= 2.0 * PI / k as f64;
            }
            v
        }
    }
}

/// One term `coeff · s^exponent`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Monomial {
    pub coeff: f64,
    pub exponent: f64,
}

/// `g` restricted to `(from, to)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Piece {
    pub from: f64,
    pub to: f64,
    pub terms: Vec<Monomial>,
}

impl Piece {
    /// Polynomial piece with `coeffs[k]` multiplying `s^k`.
    pub fn polynomial(from: f64, to: f64, coeffs: &[f64]) -> Self {
        let terms = coeffs
            .iter()
            .enumerate()
            .map(|(k, &c)| Monomial { coeff: c, exponent: k as f64 })
            .collect();
        Piece { from, to, terms }
    }

    pub fn value(&self, s: f64) -> f64 {
        self.terms.iter().map(|t| t.coeff * pow(s, t.exponent)).sum()
    }

    pub fn derivative(&self, s: f64) -> f64 {
        self.terms
            .iter()
            .filter(|t| t.exponent != 0.0)
            .map(|t| t.coeff * t.exponent * pow(s, t.exponent - 1.0))
            .sum()
    }

    pub fn second_derivative(&self, s: f64) -> f64 {
        self.terms
            .iter()
            .filter(|t| t.exponent != 0.0 && t.exponent != 1.0)
            .map(|t| t.coeff * t.exponent * (t.exponent - 1.0) * pow(s, t.exponent - 2.0))
            .sum()
    }

    /// Terms that contribute to `g'`.
    fn active(&self) -> impl Iterator<Item = &Monomial> {
        self.terms.iter().filter(|t| t.coeff != 0.0 && t.exponent != 0.0)
    }

    /// `∫_a^b s·g(s) ds`, in closed form.
    fn first_moment(&self, a: f64, b: f64) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let e = t.exponent + 2.0;
                t.coeff * (pow(b, e) - pow(a, e)) / e
            })
            .sum()
    }
}

fn pow(s: f64, a: f64) -> f64 {
    if a == 0.0 {
        1.0
    } else if a.fract() == 0.0 && a.abs() < 64.0 {
        s.powi(a as i32)
    } else {
        s.powf(a)
    }
}

/// Radial profile on `(0, R)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialProfile {
    dim: usize,
    outer: f64,
    pieces: Vec<Piece>,
    jumps: Vec<(f64, f64)>,
}

/// Split of the variation into its atomic and absolutely continuous parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HtvValue {
    pub value: f64,
    pub jump_part: f64,
    pub ac_part: f64,
}

impl RadialProfile {
    /// Builds a profile and checks that `jumps` matches the derivative jumps
    /// of the pieces.
    pub fn new(dim: usize, outer: f64, pieces: Vec<Piece>, jumps: Vec<(f64, f64)>) -> Result<Self> {
        let derived = Self::validate_pieces(dim, outer, &pieces)?;
        let mut listed = jumps.clone();
        listed.sort_by(|a, b| a.0.total_cmp(&b.0));
        for &(r, j) in &listed {
            if !j.is_finite() || j == 0.0 {
                return Err(Error::invalid(format!("jump at {r} must be finite and nonzero")));
            }
            if !pieces.iter().any(|p| p.to == r) || r >= outer {
                return Err(Error::invalid(format!("jump radius {r} is not an interior breakpoint")));
            }
        }
        for &(r, j) in &derived {
            let given = listed.iter().find(|x| x.0 == r).map(|x| x.1).unwrap_or(0.0);
            if (given - j).abs() > 1e-9 * (1.0 + j.abs()) {
                return Err(Error::invalid(format!(
                    "jump of g' at {r} is {j}, but the jump list gives {given}"
                )));
            }
        }
        for &(r, j) in &listed {
            if !derived.iter().any(|x| x.0 == r) && j.abs() > 1e-9 {
                return Err(Error::invalid(format!("listed jump at {r} but g' is continuous there")));
            }
        }
        Ok(RadialProfile { dim, outer, pieces, jumps: listed })
    }

    /// Builds a profile with the jump list read off the pieces.
    pub fn from_pieces(dim: usize, outer: f64, pieces: Vec<Piece>) -> Result<Self> {
        let jumps = Self::validate_pieces(dim, outer, &pieces)?;
        Ok(RadialProfile { dim, outer, pieces, jumps })
    }

    fn validate_pieces(dim: usize, outer: f64, pieces: &[Piece]) -> Result<Vec<(f64, f64)>> {
        if dim < 2 {
            return Err(Error::invalid("radial profiles need dim >= 2"));
        }
        if !(outer > 0.0) {
            return Err(Error::invalid("outer radius must be positive"));
        }
        let first = pieces.first().ok_or_else(|| Error::invalid("profile has no pieces"))?;
        if first.from != 0.0 {
            return Err(Error::invalid("first piece must start at 0"));
        }
        let last = pieces.last().unwrap();
        if last.to != outer {
            return Err(Error::invalid("last piece must end at the outer radius"));
        }
        let mut jumps = Vec::new();
        for (k, p) in pieces.iter().enumerate() {
            if !(p.from < p.to) {
                return Err(Error::invalid(format!("piece {k} has empty interval")));
            }
            for t in &p.terms {
                if !t.coeff.is_finite() || !t.exponent.is_finite() || t.exponent < MIN_EXPONENT {
                    return Err(Error::invalid(format!(
                        "piece {k} has term {}·s^{} outside the supported range",
                        t.coeff, t.exponent
                    )));
                }
            }
            if k > 0 {
                let prev = &pieces[k - 1];
                if prev.to != p.from {
                    return Err(Error::invalid(format!("gap between pieces {} and {k}", k - 1)));
                }
                let r = p.from;
                let (a, b) = (prev.value(r), p.value(r));
                if (a - b).abs() > 1e-12 * (1.0 + a.abs().max(b.abs())) {
                    return Err(Error::invalid(format!("g is discontinuous at {r}: {a} vs {b}")));
                }
                let j = p.derivative(r) - prev.derivative(r);
                let scale = 1.0 + p.derivative(r).abs().max(prev.derivative(r).abs());
                if j.abs() > 1e-13 * scale {
                    jumps.push((r, j));
                }
            }
        }
        Ok(jumps)
    }

    /// The cut cone `(1 − s)₊` on `(0, ∞)` in dimension `dim`.
    ///
    /// Panics if `dim < 2`.
    pub fn cone(dim: usize) -> Self {
        let pieces = vec![
            Piece::polynomial(0.0, 1.0, &[1.0, -1.0]),
            Piece::polynomial(1.0, f64::INFINITY, &[0.0]),
        ];
        RadialProfile::from_pieces(dim, f64::INFINITY, pieces).expect("cone profile is valid")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn outer_radius(&self) -> f64 {
        self.outer
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn jumps(&self) -> &[(f64, f64)] {
        &self.jumps
    }

    /// `g(s)` for `0 < s < R`; at breakpoints the right piece is used.
    pub fn value(&self, s: f64) -> f64 {
        let piece = self
            .pieces
            .iter()
            .find(|p| s < p.to)
            .unwrap_or_else(|| self.pieces.last().unwrap());
        piece.value(s)
    }

    /// `g(0⁺)`, or an error when `g` is unbounded at the origin.
    pub fn value_at_origin(&self) -> Result<f64> {
        let p = &self.pieces[0];
        let mut v = 0.0;
        for t in &p.terms {
            if t.coeff == 0.0 {
                continue;
            }
            if t.exponent < 0.0 {
                return Err(Error::invalid("profile is unbounded at the origin"));
            }
            if t.exponent == 0.0 {
                v += t.coeff;
            }
        }
        Ok(v)
    }
}

/// Bump profile `(1 − s^ε)₊` in dimension 2.
pub fn bump_profile(eps: f64) -> Result<RadialProfile> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::invalid(format!("bump exponent must lie in (0,1), got {eps}")));
    }
    let pieces = vec![
        Piece {
            from: 0.0,
            to: 1.0,
            terms: vec![
                Monomial { coeff: 1.0, exponent: 0.0 },
                Monomial { coeff: -1.0, exponent: eps },
            ],
        },
        Piece::polynomial(1.0, f64::INFINITY, &[0.0]),
    ];
    RadialProfile::new(2, f64::INFINITY, pieces, vec![(1.0, eps)])
}

/// Variation of `f(x) = g(|x|)` on the open ball `B_r`.
pub fn radial_htv(profile: &RadialProfile, p: PExponent, r: f64) -> Result<HtvValue> {
    if !(r > 0.0) {
        return Err(Error::invalid("radius must be positive"));
    }
    if r > profile.outer {
        return Err(Error::invalid(format!("radius {r} exceeds outer radius {}", profile.outer)));
    }
    let d = profile.dim;
    let area = d as f64 * unit_ball_volume(d);
    let jump_sum: f64 = profile
        .jumps
        .iter()
        .filter(|(rk, _)| *rk < r)
        .map(|(rk, j)| rk.powi(d as i32 - 1) * j.abs())
        .fold(0.0, |a, x| a + x);
    let mut integral = 0.0;
    for piece in &profile.pieces {
        if piece.from >= r {
            break;
        }
        let b = piece.to.min(r);
        integral += piece_integral(piece, d, p, piece.from, b)?;
        if integral > DIVERGENCE_CAP {
            return Err(Error::Divergent(format!("partial integral exceeds {DIVERGENCE_CAP:e}")));
        }
    }
    let jump_part = area * jump_sum;
    let ac_part = area * integral;
    Ok(HtvValue { value: jump_part + ac_part, jump_part, ac_part })
}

/// Variation on the annulus `r1 ≤ |x| < r2`.
pub fn radial_htv_annulus(profile: &RadialProfile, p: PExponent, r1: f64, r2: f64) -> Result<f64> {
    if !(r1 < r2) {
        return Err(Error::invalid("annulus radii must satisfy r1 < r2"));
    }
    Ok(radial_htv(profile, p, r2)?.value - radial_htv(profile, p, r1)?.value)
}

/// Integrand `‖(s g'', g', …, g')‖_p s^{d−2}` with the power `s^γ` divided out.
fn reduced_integrand(piece: &Piece, d: usize, p: PExponent, s: f64, gamma: f64) -> f64 {
    // every active term of s g'' and g' scales like s^{a-1}
    let mut a = 0.0;
    let mut b = 0.0;
    let shift = gamma - (d as f64 - 2.0);
    for t in piece.active() {
        let e = t.exponent - 1.0 - shift;
        let sp = pow(s, e);
        a += t.coeff * t.exponent * (t.exponent - 1.0) * sp;
        b += t.coeff * t.exponent * sp;
    }
    let mut v = vec![b; d];
    v[0] = a;
    p.norm(&v)
}

fn piece_integral(piece: &Piece, d: usize, p: PExponent, a: f64, b: f64) -> Result<f64> {
    let active: Vec<&Monomial> = piece.active().collect();
    if active.is_empty() {
        return Ok(0.0);
    }
    let dm2 = d as f64 - 2.0;
    let lo_exp = active.iter().map(|t| t.exponent).fold(f64::INFINITY, f64::min);
    let hi_exp = active.iter().map(|t| t.exponent).fold(f64::NEG_INFINITY, f64::max);
    let tol = 1e-13;

    if b.is_infinite() {
        let start = a.max(1.0);
        let mut v = if start > a { piece_integral(piece, d, p, a, start)? } else { 0.0 };
        // s^{β'} H(s) with β' the leading power at infinity; s = start·w^{-1/β}
        let beta_p = hi_exp - 1.0 + dm2;
        let beta = -(beta_p + 1.0);
        if !(beta > 0.0) {
            return Err(Error::Divergent("integrand decays too slowly at infinity".into()));
        }
        let h = |w: f64| {
            if w <= 0.0 {
                return 0.0;
            }
            let s = start * w.powf(-1.0 / beta);
            reduced_integrand(piece, d, p, s, beta_p)
        };
        let scale = start.powf(beta_p + 1.0) / beta;
        v += scale * quadrature::integrate(&h, 0.0, 1.0, tol)?;
        return Ok(v);
    }

    if a == 0.0 {
        // s^γ H(s) near the origin; s = t^{1/(γ+1)} flattens the weight
        let gamma = lo_exp - 1.0 + dm2;
        if !(gamma > -1.0) {
            return Err(Error::Divergent("integrand is not integrable at the origin".into()));
        }
        let k = 1.0 / (gamma + 1.0);
        let h = |t: f64| {
            if t <= 0.0 {
                return reduced_integrand(piece, d, p, 0.0, gamma);
            }
            reduced_integrand(piece, d, p, t.powf(k), gamma)
        };
        let upper = b.powf(gamma + 1.0);
        let v = k * quadrature::integrate(&h, 0.0, upper, tol)?;
        return Ok(v);
    }

    let f = |s: f64| reduced_integrand(piece, d, p, s, dm2) * pow(s, dm2);
    quadrature::integrate(&f, a, b, tol * (b - a).max(1.0))
}

/// Diagnostic comparing `g(0⁺)` with the mean of `f` over `B_r` in the plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AverageGap {
    pub gap: f64,
    pub bound: f64,
    pub holds: bool,
}

/// `|f(0) − ⨍_{B_r} f|` against the variation of `f` on `B_{2r}`, at `p = 1`.
pub fn eval_average_gap(profile: &RadialProfile, r: f64) -> Result<AverageGap> {
    if profile.dim != 2 {
        return Err(Error::invalid("average gap is defined for dim = 2"));
    }
    if !(r > 0.0) || 2.0 * r > profile.outer {
        return Err(Error::invalid("need 0 < 2r <= R"));
    }
    let g0 = profile.value_at_origin()?;
    let mut moment = 0.0;
    for piece in &profile.pieces {
        if piece.from >= r {
            break;
        }
        moment += piece.first_moment(piece.from, piece.to.min(r));
    }
    let gap = (g0 - 2.0 * moment / (r * r)).abs();
    let inner = radial_htv(profile, PExponent::ONE, r)?.value;
    let annulus = radial_htv_annulus(profile, PExponent::ONE, r, 2.0 * r)?;
    let bound = inner / (4.0 * PI) + annulus / (2.0 * PI);
    Ok(AverageGap { gap, bound, holds: gap <= bound + 1e-9 })
}

#[derive(Serialize, Deserialize)]
struct PieceFile {
    from: f64,
    #[serde(with = "crate::io::extended_f64")]
    to: f64,
    coeffs: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    exponents: Option<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct JumpFile {
    r: f64,
    j: f64,
}

#[derive(Serialize, Deserialize)]
struct ProfileFile {
    dim: usize,
    #[serde(rename = "R", with = "crate::io::extended_f64")]
    outer: f64,
    pieces: Vec<PieceFile>,
    #[serde(default)]
    jumps: Vec<JumpFile>,
}

impl RadialProfile {
    pub fn from_json(text: &str) -> Result<Self> {
        let file: ProfileFile = serde_json::from_str(text)?;
        let mut pieces = Vec::with_capacity(file.pieces.len());
        for pf in file.pieces {
            let exps = match pf.exponents {
                Some(e) => {
                    if e.len() != pf.coeffs.len() {
                        return Err(Error::invalid("coeffs and exponents differ in length"));
                    }
                    e
                }
                None => (0..pf.coeffs.len()).map(|k| k as f64).collect(),
            };
            if exps.iter().all(|e| e.fract() == 0.0) && exps.iter().any(|&e| e > 6.0) {
                return Err(Error::invalid("polynomial degree above 6"));
            }
            let terms = pf
                .coeffs
                .iter()
                .zip(&exps)
                .map(|(&coeff, &exponent)| Monomial { coeff, exponent })
                .collect();
            pieces.push(Piece { from: pf.from, to: pf.to, terms });
        }
        let jumps = file.jumps.iter().map(|j| (j.r, j.j)).collect();
        RadialProfile::new(file.dim, file.outer, pieces, jumps)
    }

    pub fn to_json(&self) -> String {
        let file = ProfileFile {
            dim: self.dim,
            outer: self.outer,
            pieces: self
                .pieces
                .iter()
                .map(|p| PieceFile {
                    from: p.from,
                    to: p.to,
                    coeffs: p.terms.iter().map(|t| t.coeff).collect(),
                    exponents: Some(p.terms.iter().map(|t| t.exponent).collect()),
                })
                .collect(),
            jumps: self.jumps.iter().map(|&(r, j)| JumpFile { r, j }).collect(),
        };
        serde_json::to_string_pretty(&file).expect("profile serializes")
    }
}
