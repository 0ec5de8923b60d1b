use std::collections::BTreeMap;

use num_traits::Zero;
use serde_json::{json, Value};

use super::Exact;
use crate::executor::Coalition;
use crate::kg::EntityId;

/// Attribution of one target's rank change to the atoms of one query.
#[derive(Clone, Debug, PartialEq)]
pub struct ShapleyReport {
    pub target: EntityId,
    pub num_atoms: usize,
    /// Rank with every atom symbolic.
    pub rank_symbolic: usize,
    /// Rank with every atom neural.
    pub rank_neural: usize,
    /// Rank under each coalition, bitmask order.
    pub ranks: Vec<usize>,
    /// `rank_symbolic - rank(S)` per coalition, bitmask order.
    pub values: Vec<i64>,
    pub phi: Vec<Exact>,
    pub efficiency_residual: Exact,
}

impl ShapleyReport {
    pub fn phi_sum(&self) -> Exact {
        self.phi.iter().fold(Exact::zero(), |acc, &p| acc + p)
    }

    /// Atom with the largest attribution, lowest id on ties.
    pub fn top_atom(&self) -> usize {
        let mut best = 0;
        for (a, p) in self.phi.iter().enumerate() {
            if *p > self.phi[best] {
                best = a;
            }
        }
        best
    }

    /// Report document. `query` and `atoms` are human-readable renderings.
    pub fn to_json(&self, query: &str, atoms: &[String]) -> Value {
        let phi: BTreeMap<String, String> = self
            .phi
            .iter()
            .enumerate()
            .map(|(a, p)| (a.to_string(), format_decimal(*p)))
            .collect();
        let phi_exact: BTreeMap<String, String> = self
            .phi
            .iter()
            .enumerate()
            .map(|(a, p)| (a.to_string(), p.to_string()))
            .collect();
        let coalitions: BTreeMap<String, i64> = self
            .values
            .iter()
            .enumerate()
            .map(|(bits, &v)| (Coalition::from_bits(bits as u32).label(self.num_atoms), v))
            .collect();
        let ranks: BTreeMap<String, usize> = self
            .ranks
            .iter()
            .enumerate()
            .map(|(bits, &r)| (Coalition::from_bits(bits as u32).label(self.num_atoms), r))
            .collect();
        let atoms: BTreeMap<String, &String> = atoms.iter().enumerate().map(|(a, s)| (a.to_string(), s)).collect();
        json!({
            "query": query,
            "target": self.target.0,
            "rank_symbolic": self.rank_symbolic,
            "rank_neural": self.rank_neural,
            "phi": phi,
            "phi_exact": phi_exact,
            "phi_sum": format_decimal(self.phi_sum()),
            "efficiency_residual": self.efficiency_residual.to_string(),
            "coalitions": coalitions,
            "ranks": ranks,
            "atoms": atoms,
        })
    }
}

/// One decimal place, halves rounded away from zero, explicit sign unless
/// the rounded value is zero.
pub fn format_decimal(x: Exact) -> String {
    let tenths = (x * Exact::from(10)).round().to_integer();
    let sign = match tenths.signum() {
        1 => "+",
        -1 => "-",
        _ => "",
    };
    let abs = tenths.abs();
    format!("{sign}{}.{}", abs / 10, abs % 10)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimal_rendering() {
        assert_eq!(format_decimal(Exact::new(247, 2)), "+123.5");
        assert_eq!(format_decimal(Exact::new(-257, 2)), "-128.5");
        assert_eq!(format_decimal(Exact::new(1, 3)), "+0.3");
        assert_eq!(format_decimal(Exact::new(-1, 3)), "-0.3");
        assert_eq!(format_decimal(Exact::new(1, 20)), "+0.1");
        assert_eq!(format_decimal(Exact::new(-1, 20)), "-0.1");
        assert_eq!(format_decimal(Exact::new(-1, 30)), "0.0");
        assert_eq!(format_decimal(Exact::from(-5)), "-5.0");
    }

    #[test]
    fn json_layout() {
        let r = ShapleyReport {
            target: EntityId(9),
            num_atoms: 2,
            rank_symbolic: 56,
            rank_neural: 61,
            ranks: vec![56, 1, 90, 61],
            values: vec![0, 55, -34, -5],
            phi: vec![Exact::new(247, 2), Exact::new(-257, 2)],
            efficiency_residual: Exact::zero(),
        };
        let v = r.to_json("?V: ...", &["a".into(), "b".into()]);
        assert_eq!(v["phi"]["0"], "+123.5");
        assert_eq!(v["coalitions"]["0b00"], 0);
        assert_eq!(v["coalitions"]["0b11"], -5);
        assert_eq!(v["rank_symbolic"], 56);
        assert_eq!(v["phi_sum"], "-5.0");
        assert_eq!(r.top_atom(), 0);
    }
}
