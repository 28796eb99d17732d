//! Independent solution checker. Works on the parsed instance only and
//! evaluates every constraint with its own arithmetic.

use std::fmt::Write as _;

use pbopt::opb::{Instance, Relation, Term};

#[derive(Debug)]
pub struct Report {
    pub valid: bool,
    pub lines: Vec<String>,
}

/// Parses a model line such as `x1 -x2 x3` (an optional leading `v` is
/// accepted). Every variable of the instance must be assigned exactly once.
pub fn parse_model(line: &str, n_vars: usize) -> Result<Vec<bool>, String> {
    let mut vals: Vec<Option<bool>> = vec![None; n_vars];
    for tok in line.split_whitespace() {
        if tok == "v" {
            continue;
        }
        let (neg, rest) = match tok.strip_prefix('-') {
            Some(r) => (true, r),
            None => (false, tok),
        };
        let idx: usize = rest
            .strip_prefix('x')
            .and_then(|d| d.parse().ok())
            .filter(|&i| i >= 1)
            .ok_or_else(|| format!("bad literal `{tok}`"))?;
        if idx > n_vars {
            return Err(format!("x{idx} is not a variable of the instance ({n_vars} variables)"));
        }
        if vals[idx - 1].replace(!neg).is_some() {
            return Err(format!("x{idx} assigned twice"));
        }
    }
    let missing: Vec<String> = (0..n_vars).filter(|&i| vals[i].is_none()).map(|i| format!("x{}", i + 1)).collect();
    if !missing.is_empty() {
        return Err(format!("unassigned: {}", missing.join(" ")));
    }
    Ok(vals.into_iter().map(|v| v.unwrap()).collect())
}

fn sum(terms: &[Term], x: &[bool]) -> i128 {
    let mut s = 0i128;
    for t in terms {
        let mut on = true;
        for &v in &t.vars {
            on &= x[v as usize - 1];
        }
        if on {
            s += t.coef as i128;
        }
    }
    s
}

pub fn check(inst: &Instance, x: &[bool]) -> Report {
    let mut lines = Vec::new();
    let mut valid = true;
    let mut violation_cost = 0i128;
    for (i, c) in inst.constraints.iter().enumerate() {
        let act = sum(&c.terms, x);
        let (ok, rel) = match c.relation {
            Relation::Ge => (act >= c.rhs as i128, ">="),
            Relation::Eq => (act == c.rhs as i128, "="),
        };
        let mut line = format!("constraint {}: activity {act} {rel} {}", i + 1, c.rhs);
        match (ok, c.weight) {
            (true, _) => line.push_str(" ok"),
            (false, None) => {
                valid = false;
                let _ = write!(line, " VIOLATED (off by {})", c.rhs as i128 - act);
            }
            (false, Some(w)) => {
                violation_cost += w as i128;
                let _ = write!(line, " soft, violated at cost {w}");
            }
        }
        lines.push(line);
    }
    if inst.is_wbo {
        lines.push(format!("violation cost: {violation_cost}"));
        if let Some(top) = inst.top_cost {
            if violation_cost >= top as i128 {
                valid = false;
                lines.push(format!("violation cost {violation_cost} reaches top {top}: VIOLATED"));
            }
        }
    } else if let Some(o) = &inst.objective {
        lines.push(format!("objective: {}", o.offset as i128 + sum(&o.terms, x)));
    }
    Report { valid, lines }
}

#[cfg(test)]
mod tests {
    use super::*;
    use pbopt::parse;

    #[test]
    fn model_parsing() {
        assert_eq!(parse_model("v x1 -x2", 2).unwrap(), vec![true, false]);
        assert!(parse_model("x1", 2).unwrap_err().contains("x2"));
        assert!(parse_model("x1 x1", 1).is_err());
        assert!(parse_model("x3", 2).is_err());
        assert!(parse_model("y1", 1).is_err());
    }

    #[test]
    fn forged_near_solution_is_invalid() {
        let inst = parse(b"+5567264 x1 +275534 x2 +2 x3 = 5842800;").unwrap();
        let r = check(&inst, &[true, true, false]);
        assert!(!r.valid);
        assert!(r.lines[0].contains("VIOLATED"));
        assert!(check(&inst, &[true, true, true]).valid);
    }
}
