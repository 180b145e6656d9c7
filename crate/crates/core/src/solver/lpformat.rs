use std::fmt::Write as _;

use super::program::{LinearProgram, Relation, Sense};

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' })
        .collect()
}

fn term(out: &mut String, coef: f64, name: &str, first: bool) {
    if coef < 0.0 {
        let _ = write!(out, " - {} {}", -coef, name);
    } else if first {
        let _ = write!(out, " {coef} {name}");
    } else {
        let _ = write!(out, " + {coef} {name}");
    }
}

/// Renders the program in the CPLEX-style LP text format for cross-checking
/// with external solvers.
pub fn write_lp_format(lp: &LinearProgram) -> String {
    let names: Vec<String> = lp
        .variables
        .iter()
        .enumerate()
        .map(|(i, v)| format!("x{i}_{}", sanitize(&v.name)))
        .collect();
    let mut out = String::new();
    out.push_str(match lp.sense {
        Sense::Minimize => "Minimize\n obj:",
        Sense::Maximize => "Maximize\n obj:",
    });
    let mut first = true;
    for (v, name) in lp.variables.iter().zip(&names) {
        if v.cost != 0.0 {
            term(&mut out, v.cost, name, first);
            first = false;
        }
    }
    if first {
        out.push_str(" 0");
    }
    out.push_str("\nSubject To\n");
    for (i, c) in lp.constraints.iter().enumerate() {
        let _ = write!(out, " c{i}_{}:", sanitize(&c.name));
        let mut first = true;
        for &(v, a) in &c.terms {
            term(&mut out, a, &names[v.0], first);
            first = false;
        }
        if first {
            let _ = write!(out, " 0 {}", names.first().map_or("x", |s| s.as_str()));
        }
        let op = match c.relation {
            Relation::Le => "<=",
            Relation::Ge => ">=",
            Relation::Eq => "=",
        };
        let _ = writeln!(out, " {op} {}", c.rhs);
    }
    out.push_str("Bounds\n");
    for (v, name) in lp.variables.iter().zip(&names) {
        match (v.lower.is_finite(), v.upper.is_finite()) {
            (true, true) => {
                let _ = writeln!(out, " {} <= {name} <= {}", v.lower, v.upper);
            }
            (true, false) => {
                let _ = writeln!(out, " {name} >= {}", v.lower);
            }
            (false, true) => {
                let _ = writeln!(out, " -inf <= {name} <= {}", v.upper);
            }
            (false, false) => {
                let _ = writeln!(out, " {name} free");
            }
        }
    }
    let ints: Vec<&String> = lp
        .variables
        .iter()
        .zip(&names)
        .filter(|(v, _)| v.integer)
        .map(|(_, n)| n)
        .collect();
    if !ints.is_empty() {
        out.push_str("General\n");
        for n in ints {
            let _ = writeln!(out, " {n}");
        }
    }
    out.push_str("End\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_sections() {
        let mut lp = LinearProgram::new(Sense::Minimize);
        let x = lp.add_var("x", 0.0, f64::INFINITY, 1.0);
        let b = lp.add_binary("pick me", -2.0);
        lp.add_constraint("floor", vec![(x, 1.0), (b, -1.0)], Relation::Ge, 3.0);
        let text = write_lp_format(&lp);
        assert!(text.starts_with("Minimize\n obj: 1 x0_x - 2 x1_pick_me"));
        assert!(text.contains("c0_floor: 1 x0_x - 1 x1_pick_me >= 3"));
        assert!(text.contains("General\n x1_pick_me"));
        assert!(text.ends_with("End\n"));
    }
}
