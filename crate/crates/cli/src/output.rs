//! Number formatting shared by the JSON and table renderers.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use serde_json::{json, Value as Json};

use sheaflens::cech::{Bar, PersistenceDiagram};

/// Significant digits of every printed number.
pub const DIGITS: usize = 12;

/// Rounds to `DIGITS` significant digits.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", DIGITS - 1, x).parse().expect("formatted float parses")
}

/// Text form of a number: 12 significant digits, `inf` for infinity.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        let r = round_sig(x);
        if r == 0.0 {
            "0".into()
        } else if r.abs() < 1e-6 || r.abs() >= 1e15 {
            format!("{r:e}")
        } else {
            r.to_string()
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct NumFormat {
    /// Print floats as exact `[num, den]` pairs.
    pub exact: bool,
}

impl NumFormat {
    pub fn num(&self, x: f64) -> Json {
        if !x.is_finite() {
            return Json::String(fmt_num(x));
        }
        if self.exact {
            let q = BigRational::from_float(x).expect("finite floats are rational");
            return json!([int(q.numer()), int(q.denom())]);
        }
        serde_json::Number::from_f64(round_sig(x)).map_or(Json::Null, Json::Number)
    }

    pub fn nums(&self, xs: &[f64]) -> Json {
        Json::Array(xs.iter().map(|&x| self.num(x)).collect())
    }

    pub fn bar(&self, b: &Bar) -> Json {
        json!({
            "degree": b.degree,
            "birth": self.num(b.birth),
            "death": self.num(b.death),
            "multiplicity": b.multiplicity,
        })
    }

    pub fn diagram(&self, d: &PersistenceDiagram) -> Json {
        Json::Array(d.bars().iter().map(|b| self.bar(b)).collect())
    }
}

/// Integers that fit in `i64` print as numbers, larger ones as strings.
fn int(n: &BigInt) -> Json {
    n.to_i64().map_or_else(|| Json::String(n.to_string()), Json::from)
}

/// `degree,birth,death,multiplicity` rows for external plotting.
pub fn plot_csv(d: &PersistenceDiagram) -> String {
    let mut out = String::from("degree,birth,death,multiplicity\n");
    for b in d.bars() {
        out.push_str(&format!("{},{},{},{}\n", b.degree, fmt_num(b.birth), fmt_num(b.death), b.multiplicity));
    }
    out
}

/// A plain text table with left-aligned columns.
pub fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        let padded: Vec<String> = cells.iter().zip(&widths).map(|(c, &w)| format!("{c:<w$}")).collect();
        padded.join("  ").trim_end().to_string() + "\n"
    };
    let mut out = line(header.to_vec());
    for row in rows {
        out.push_str(&line(row.iter().map(String::as_str).collect()));
    }
    out
}

/// Bars as a text table.
pub fn bar_table(d: &PersistenceDiagram) -> String {
    let rows: Vec<Vec<String>> = d
        .bars()
        .iter()
        .map(|b| vec![b.degree.to_string(), fmt_num(b.birth), fmt_num(b.death), b.multiplicity.to_string()])
        .collect();
    table(&["degree", "birth", "death", "mult"], &rows)
}
