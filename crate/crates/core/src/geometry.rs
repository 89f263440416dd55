//! The action set: a Euclidean ball with exact projection.

use crate::error::{Error, Result};
use crate::Action;

/// Absolute slack used for membership checks.
pub const MEMBERSHIP_TOLERANCE: f64 = 1e-12;

/// Euclidean ball `{x : ||x - center|| <= radius}` in `R^D`.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionSet {
    center: Action,
    radius: f64,
}

impl ActionSet {
    pub fn new(center: Action, radius: f64) -> Result<Self> {
        if center.is_empty() {
            return Err(Error::InvalidInput("action set dimension must be >= 1".into()));
        }
        if !(radius.is_finite() && radius >= 0.0) {
            return Err(Error::InvalidInput(format!("radius must be finite and >= 0, got {radius}")));
        }
        if center.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("center must be finite".into()));
        }
        Ok(Self { center, radius })
    }

    /// Ball of the given radius centered at the origin.
    pub fn centered(dimension: usize, radius: f64) -> Result<Self> {
        Self::new(Action::zeros(dimension), radius)
    }

    pub fn center(&self) -> &Action {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn dimension(&self) -> usize {
        self.center.len()
    }

    /// The diameter `R = 2 * radius`.
    pub fn diameter(&self) -> f64 {
        2.0 * self.radius
    }

    pub fn contains(&self, p: &Action) -> bool {
        (p - &self.center).norm() <= self.radius + MEMBERSHIP_TOLERANCE
    }

    /// Euclidean projection onto the ball. Interior points are returned unchanged.
    pub fn project(&self, p: &Action) -> Result<Action> {
        if p.len() != self.dimension() {
            return Err(Error::InvalidInput(format!(
                "point has dimension {}, set has dimension {}",
                p.len(),
                self.dimension()
            )));
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("cannot project a non-finite point".into()));
        }
        Ok(self.project_unchecked(p))
    }

    pub(crate) fn project_unchecked(&self, p: &Action) -> Action {
        let offset = p - &self.center;
        let dist = offset.norm();
        if dist <= self.radius {
            return p.clone();
        }
        let scale = self.radius / dist;
        let mut out = &self.center + &offset * scale;
        // Scaling can land a few ulps outside; pull back so a second projection is a no-op.
        let mut slack = f64::EPSILON;
        while (&out - &self.center).norm() > self.radius {
            out = &self.center + &offset * (scale * (1.0 - slack)).max(0.0);
            slack *= 2.0;
        }
        out
    }

    /// Support function `max_{x in X} <direction, x>`.
    pub fn support(&self, direction: &Action) -> f64 {
        direction.dot(&self.center) + self.radius * direction.norm()
    }

    /// `max_{x in X} ||x - point||`.
    pub fn max_distance_from(&self, point: &Action) -> f64 {
        (point - &self.center).norm() + self.radius
    }
}
