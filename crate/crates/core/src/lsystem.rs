//! Bracketed L-system expansion and trunk turtle interpretation.
//!
//! The turtle alphabet is `F + - [ ] X`:
//!
//! * `F` advances one step up the trunk (only outside brackets; inside a
//!   bracket the turtle is on a branch and the trunk position is unchanged),
//! * `+` / `-` yaw the current branch heading by the branching angle,
//! * `[` / `]` push and pop the turtle state,
//! * `X` spawns a first-level branch at the current trunk height.
//!
//! Any other symbol is a non-terminal: it may carry a production rule and is
//! ignored by the turtle.

use crate::geom::Vec3;
use crate::num::Real;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

pub const TURTLE_SYMBOLS: [char; 6] = ['F', '+', '-', '[', ']', 'X'];

/// Upper bound on expanded string length.
pub const MAX_EXPANDED_LEN: usize = 10_000_000;

/// Golden angle in degrees, the default yaw increment between successive branches.
pub const GOLDEN_ANGLE_DEG: f64 = 137.507_764_050_037_85;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LSystemError {
    #[error("unknown symbol '{symbol}': no production rule and not a turtle symbol")]
    UnknownSymbol { symbol: char },
    #[error("unbalanced bracket at index {index}")]
    UnbalancedBracket { index: usize },
    #[error("expanded string exceeds {limit} symbols")]
    TooLong { limit: usize },
    #[error("invalid turtle parameter `{field}`: {reason}")]
    InvalidTurtle {
        field: &'static str,
        reason: &'static str,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Real")]
pub struct TurtleParams<T> {
    /// Trunk advance per `F`, meters.
    pub step_length: T,
    /// Branch tilt away from the trunk axis and the `+`/`-` yaw, degrees.
    pub branch_angle_deg: T,
    /// Yaw added between successive `X` branches, degrees.
    #[serde(default = "default_azimuth_increment")]
    pub azimuth_increment_deg: T,
}

fn default_azimuth_increment<T: Real>() -> T {
    T::lit(GOLDEN_ANGLE_DEG)
}

impl<T: Real> Default for TurtleParams<T> {
    fn default() -> Self {
        Self {
            step_length: T::lit(0.4),
            branch_angle_deg: T::lit(50.0),
            azimuth_increment_deg: T::lit(GOLDEN_ANGLE_DEG),
        }
    }
}

impl<T: Real> TurtleParams<T> {
    pub fn validate(&self) -> Result<(), LSystemError> {
        if !(self.step_length > T::zero()) || !self.step_length.is_finite() {
            return Err(LSystemError::InvalidTurtle {
                field: "step_length",
                reason: "must be positive and finite",
            });
        }
        if !self.branch_angle_deg.is_finite() {
            return Err(LSystemError::InvalidTurtle {
                field: "branch_angle_deg",
                reason: "must be finite",
            });
        }
        if !self.azimuth_increment_deg.is_finite() {
            return Err(LSystemError::InvalidTurtle {
                field: "azimuth_increment_deg",
                reason: "must be finite",
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Real")]
pub struct LSystemSpec<T> {
    pub axiom: String,
    #[serde(default)]
    pub rules: BTreeMap<char, String>,
    pub iterations: u32,
    #[serde(default)]
    pub turtle: TurtleParams<T>,
}

impl<T: Real> Default for LSystemSpec<T> {
    /// Stand-in trunk system: four bare trunk steps, then one branch per step.
    /// Seven iterations give seven first-level branches between 2.0 m and 4.4 m.
    fn default() -> Self {
        Self {
            axiom: "FFFFA".to_owned(),
            rules: BTreeMap::from([('A', "F[X]A".to_owned())]),
            iterations: 7,
            turtle: TurtleParams::default(),
        }
    }
}

impl<T: Real> LSystemSpec<T> {
    fn known(&self, c: char) -> bool {
        self.rules.contains_key(&c) || TURTLE_SYMBOLS.contains(&c)
    }

    /// Checks that every symbol of the axiom and of every replacement is declared.
    pub fn validate(&self) -> Result<(), LSystemError> {
        let all = self
            .axiom
            .chars()
            .chain(self.rules.values().flat_map(|s| s.chars()));
        for c in all {
            if !self.known(c) {
                return Err(LSystemError::UnknownSymbol { symbol: c });
            }
        }
        self.turtle.validate()
    }
}

/// Applies the rules `spec.iterations` times in parallel to every symbol.
pub fn expand<T: Real>(spec: &LSystemSpec<T>) -> Result<String, LSystemError> {
    spec.validate()?;
    let mut current = spec.axiom.clone();
    for _ in 0..spec.iterations {
        let mut next = String::with_capacity(current.len() * 2);
        for c in current.chars() {
            match spec.rules.get(&c) {
                Some(rhs) => next.push_str(rhs),
                None if TURTLE_SYMBOLS.contains(&c) => next.push(c),
                None => return Err(LSystemError::UnknownSymbol { symbol: c }),
            }
            if next.len() > MAX_EXPANDED_LEN {
                return Err(LSystemError::TooLong {
                    limit: MAX_EXPANDED_LEN,
                });
            }
        }
        if next == current {
            break;
        }
        current = next;
    }
    Ok(current)
}

/// A first-level branch location on the trunk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchAttachment<T> {
    /// Point on the trunk axis (x = y = 0), meters.
    pub position: Vec3<T>,
    /// Unit growth direction of the branch.
    pub direction: Vec3<T>,
    /// Bracket nesting depth of the spawning symbol.
    pub depth: u32,
}

/// Result of interpreting an expanded string along the trunk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrunkLayout<T> {
    /// Trunk length covered by the unbracketed `F` steps, meters.
    pub height: T,
    /// Attachments sorted by height (ties keep string order).
    pub attachments: Vec<BranchAttachment<T>>,
}

#[derive(Clone, Copy)]
struct TurtleState<T> {
    yaw: T,
}

pub fn interpret_trunk<T: Real>(
    expanded: &str,
    turtle: &TurtleParams<T>,
) -> Result<TrunkLayout<T>, LSystemError> {
    turtle.validate()?;
    let tilt = turtle.branch_angle_deg.to_radians();
    let turn = turtle.branch_angle_deg.to_radians();
    let increment = turtle.azimuth_increment_deg.to_radians();
    let (sin_tilt, cos_tilt) = tilt.sin_cos();

    let mut height = T::zero();
    let mut state = TurtleState { yaw: T::zero() };
    let mut stack: Vec<(usize, TurtleState<T>)> = Vec::new();
    let mut spawned = 0usize;
    let mut attachments = Vec::new();

    for (index, c) in expanded.chars().enumerate() {
        match c {
            'F' if stack.is_empty() => height = height + turtle.step_length,
            '+' => state.yaw = state.yaw + turn,
            '-' => state.yaw = state.yaw - turn,
            '[' => stack.push((index, state)),
            ']' => {
                let (_, saved) = stack
                    .pop()
                    .ok_or(LSystemError::UnbalancedBracket { index })?;
                state = saved;
            }
            'X' => {
                let azimuth = increment * T::from_usize_lossy(spawned) + state.yaw;
                let (s, c) = azimuth.sin_cos();
                let direction = Vec3::new(sin_tilt * c, sin_tilt * s, cos_tilt).normalize();
                attachments.push(BranchAttachment {
                    position: Vec3::new(T::zero(), T::zero(), height),
                    direction,
                    depth: stack.len() as u32,
                });
                spawned += 1;
            }
            _ => {}
        }
    }
    if let Some(&(index, _)) = stack.first() {
        return Err(LSystemError::UnbalancedBracket { index });
    }
    attachments.sort_by(|a, b| {
        a.position
            .z
            .partial_cmp(&b.position.z)
            .expect("finite heights")
    });
    Ok(TrunkLayout {
        height,
        attachments,
    })
}
