use std::path::Path;

use serde::Serialize;

/// 17 significant digits, enough to round-trip an `f64`.
pub fn f17(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()
}

/// One pass/fail verification with the measured value and its bound.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// `<=`, `>=`, `<` or `>` applied as `value <op> bound`.
    pub relation: &'static str,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Default, Clone, Serialize)]
pub struct Checks(pub Vec<Check>);

impl Checks {
    pub fn le(&mut self, name: impl Into<String>, value: f64, bound: f64) {
        self.push(name.into(), value, "<=", bound, value <= bound);
    }

    pub fn ge(&mut self, name: impl Into<String>, value: f64, bound: f64) {
        self.push(name.into(), value, ">=", bound, value >= bound);
    }

    pub fn gt(&mut self, name: impl Into<String>, value: f64, bound: f64) {
        self.push(name.into(), value, ">", bound, value > bound);
    }

    fn push(&mut self, name: String, value: f64, relation: &'static str, bound: f64, pass: bool) {
        self.0.push(Check { name, value, relation, bound, pass });
    }

    pub fn all_pass(&self) -> bool {
        self.0.iter().all(|c| c.pass)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0] {
            let s = f17(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
            let mantissa = s.split('e').next().unwrap().trim_start_matches('-').replace('.', "");
            assert_eq!(mantissa.len(), 17);
        }
    }

    #[test]
    fn checks_record_relations() {
        let mut c = Checks::default();
        c.le("a", 1e-13, 1e-12);
        c.gt("b", 0.0, 0.0);
        assert!(c.0[0].pass && !c.0[1].pass && !c.all_pass());
    }
}
