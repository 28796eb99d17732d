use std::fmt;
use std::ops::Not;

/// Zero-based engine variable index.
pub type Var = usize;

/// A variable or its negation, packed as `2 * var + negated`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Lit(u32);

impl Lit {
    pub fn new(var: Var, negated: bool) -> Self {
        Lit(((var as u32) << 1) | negated as u32)
    }

    pub fn pos(var: Var) -> Self {
        Self::new(var, false)
    }

    pub fn neg(var: Var) -> Self {
        Self::new(var, true)
    }

    pub fn var(self) -> Var {
        (self.0 >> 1) as Var
    }

    pub fn is_neg(self) -> bool {
        self.0 & 1 == 1
    }

    /// Dense index usable for per-literal tables.
    pub fn code(self) -> usize {
        self.0 as usize
    }

    /// Value of the literal when its variable takes `value`.
    pub fn eval(self, value: bool) -> bool {
        value != self.is_neg()
    }

    /// LP value of the literal given the variable's value.
    pub fn eval_f64(self, value: f64) -> f64 {
        if self.is_neg() {
            1.0 - value
        } else {
            value
        }
    }
}

impl Not for Lit {
    type Output = Lit;
    fn not(self) -> Lit {
        Lit(self.0 ^ 1)
    }
}

impl fmt::Debug for Lit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_neg() {
            write!(f, "~v{}", self.var())
        } else {
            write!(f, "v{}", self.var())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn packing() {
        let l = Lit::neg(7);
        assert_eq!(l.var(), 7);
        assert!(l.is_neg());
        assert_eq!(!l, Lit::pos(7));
        assert!(l.eval(false));
        assert!(!l.eval(true));
        assert_eq!(l.eval_f64(0.25), 0.75);
    }
}
