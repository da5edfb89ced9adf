//! Exact coefficients of the noise-only (γ = 0) transition probabilities,
//!   P_{j→j'} = 1/(2S+1) + Σ_s c_s(j, j') E_s,
//! where c_s(j, j') = q_s(m_j) q_s(m_j') / Σ_m q_s(m)² and q_s is the degree-s
//! polynomial orthogonal over the projections m = -S..S (the diagonal of T_{s,0}
//! up to scale).

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spin::SpinValue;

pub type Rational = Ratio<i128>;

/// Largest 2S for which the exact tables are generated.
pub const MAX_TABLE_TWO_S: u32 = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableEntry {
    pub from_two_m: i32,
    pub to_two_m: i32,
    /// 1/(2S+1).
    pub constant: (i128, i128),
    /// Coefficient of E_s at index s-1, as (numerator, denominator).
    pub coefficients: Vec<(i128, i128)>,
}

impl TableEntry {
    pub fn coefficient(&self, s: u32) -> Rational {
        let (n, d) = self.coefficients[s as usize - 1];
        Rational::new(n, d)
    }

    /// Probability for the given decay factors E_1..E_{2S}.
    pub fn evaluate(&self, decays: &[f64]) -> f64 {
        let (n, d) = self.constant;
        let mut p = n as f64 / d as f64;
        for (c, e) in self.coefficients.iter().zip(decays) {
            p += c.0 as f64 / c.1 as f64 * e;
        }
        p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoherenceTable {
    pub spin: SpinValue,
    /// Ordered by initial projection (descending), then final projection (descending).
    pub entries: Vec<TableEntry>,
}

impl DecoherenceTable {
    pub fn entry(&self, from_two_m: i32, to_two_m: i32) -> Option<&TableEntry> {
        self.entries
            .iter()
            .find(|e| e.from_two_m == from_two_m && e.to_two_m == to_two_m)
    }
}

fn pair(r: Rational) -> (i128, i128) {
    (*r.numer(), *r.denom())
}

/// Values of q_1..q_{2S} at the projections, by Gram-Schmidt on monomials of m.
fn orthogonal_values(spin: SpinValue) -> Vec<Vec<Rational>> {
    let ms: Vec<Rational> = spin.projections().map(|t| Rational::new(t as i128, 2)).collect();
    let dot = |a: &[Rational], b: &[Rational]| a.iter().zip(b).map(|(x, y)| x * y).sum::<Rational>();
    let mut basis: Vec<Vec<Rational>> = vec![vec![Rational::from_integer(1); ms.len()]];
    for k in 1..=spin.two_s() as i32 {
        let mut v: Vec<Rational> = ms.iter().map(|m| m.pow(k)).collect();
        for q in &basis {
            let c = dot(&v, q) / dot(q, q);
            for (x, y) in v.iter_mut().zip(q) {
                *x -= c * y;
            }
        }
        basis.push(v);
    }
    basis.remove(0);
    basis
}

pub fn decoherence_table(spin: SpinValue) -> Result<DecoherenceTable> {
    if spin.two_s() > MAX_TABLE_TWO_S {
        return Err(Error::Domain(format!(
            "exact tables are available up to S = {}, got {spin}",
            MAX_TABLE_TWO_S / 2
        )));
    }
    let q = orthogonal_values(spin);
    let norms: Vec<Rational> = q.iter().map(|v| v.iter().map(|x| x * x).sum()).collect();
    let d = spin.dim();
    let constant = pair(Rational::new(1, d as i128));
    let mut entries = Vec::with_capacity(d * d);
    for j in 0..d {
        for jp in 0..d {
            let coefficients = q.iter().zip(&norms).map(|(v, n)| pair(v[j] * v[jp] / n)).collect();
            entries.push(TableEntry {
                from_two_m: spin.two_m(j),
                to_two_m: spin.two_m(jp),
                constant,
                coefficients,
            });
        }
    }
    Ok(DecoherenceTable { spin, entries })
}

/// "3/2", "-1", "0".
pub fn format_projection(two_m: i32) -> String {
    if two_m % 2 == 0 {
        format!("{}", two_m / 2)
    } else {
        format!("{two_m}/2")
    }
}

pub fn format_rational(r: (i128, i128)) -> String {
    if r.1 == 1 {
        format!("{}", r.0)
    } else {
        format!("{}/{}", r.0, r.1)
    }
}

/// One line per entry: "P(1 -> 0) = 1/3 + 0 E1 - 1/3 E2".
pub fn render_table(table: &DecoherenceTable) -> String {
    let mut out = String::new();
    for e in &table.entries {
        out.push_str(&format!(
            "P({} -> {}) = {}",
            format_projection(e.from_two_m),
            format_projection(e.to_two_m),
            format_rational(e.constant)
        ));
        for (k, c) in e.coefficients.iter().enumerate() {
            let sign = if c.0 < 0 { '-' } else { '+' };
            out.push_str(&format!(" {sign} {} E{}", format_rational((c.0.abs(), c.1)), k + 1));
        }
        out.push('\n');
    }
    out
}
