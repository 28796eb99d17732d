use std::fmt;

use crate::lit::Var;
use crate::model::NormConstraint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CutKind {
    Flower1,
    Flower2,
    Rlt,
    Conflict,
}

impl CutKind {
    pub const ALL: [CutKind; 4] = [CutKind::Flower1, CutKind::Flower2, CutKind::Rlt, CutKind::Conflict];

    pub fn name(self) -> &'static str {
        match self {
            CutKind::Flower1 => "flower1",
            CutKind::Flower2 => "flower2",
            CutKind::Rlt => "rlt",
            CutKind::Conflict => "conflict",
        }
    }
}

/// `sum coef * x_var >= rhs` over engine variables. Coefficients are sorted
/// by variable and nonzero.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Cut {
    pub coefs: Vec<(Var, i64)>,
    pub rhs: i64,
    pub kind: CutKind,
}

impl fmt::Debug for Cut {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] ", self.kind.name())?;
        for (v, c) in &self.coefs {
            write!(f, "{c:+}x{v} ")?;
        }
        write!(f, ">= {}", self.rhs)
    }
}

impl Cut {
    /// Builds a cut from unsorted, possibly repeated coefficients.
    pub fn new(mut coefs: Vec<(Var, i64)>, rhs: i64, kind: CutKind) -> Cut {
        coefs.sort_unstable();
        let mut merged: Vec<(Var, i64)> = Vec::with_capacity(coefs.len());
        for (v, c) in coefs {
            match merged.last_mut() {
                Some(last) if last.0 == v => last.1 += c,
                _ => merged.push((v, c)),
            }
        }
        merged.retain(|&(_, c)| c != 0);
        Cut {
            coefs: merged,
            rhs,
            kind,
        }
    }

    pub fn from_norm(row: &NormConstraint, kind: CutKind) -> Cut {
        let (coefs, rhs) = row.to_linear();
        Cut::new(coefs, rhs, kind)
    }

    pub fn lp_activity(&self, x: &[f64]) -> f64 {
        self.coefs.iter().map(|&(v, c)| c as f64 * x[v]).sum()
    }

    /// Amount by which the point violates the cut (positive when cut off).
    pub fn violation(&self, x: &[f64]) -> f64 {
        self.rhs as f64 - self.lp_activity(x)
    }

    pub fn is_satisfied(&self, x: &[bool]) -> bool {
        let act: i128 = self
            .coefs
            .iter()
            .filter(|(v, _)| x[*v])
            .map(|&(_, c)| c as i128)
            .sum();
        act >= self.rhs as i128
    }

    /// Canonical identity of the inequality, independent of provenance.
    pub fn fingerprint(&self) -> (Vec<(Var, i64)>, i64) {
        (self.coefs.clone(), self.rhs)
    }

    /// `0 >= rhs` with positive rhs.
    pub fn is_empty_infeasible(&self) -> bool {
        self.coefs.is_empty() && self.rhs > 0
    }

    /// Trivially satisfied by every 0/1 point.
    pub fn is_trivial(&self) -> bool {
        let min_act: i128 = self.coefs.iter().map(|&(_, c)| (c as i128).min(0)).sum();
        min_act >= self.rhs as i128
    }
}
