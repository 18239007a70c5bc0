//! Text formats shared by the exporters: fixed 17-significant-digit floats,
//! plain CSV rows and rational literals.

use crate::error::{Error, Result};

/// Formats a float with 17 significant digits in scientific notation.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Parses a decimal or `p/q` rational literal.
pub fn parse_scalar(s: &str) -> Result<f64> {
    let s = s.trim();
    let v = if let Some((p, q)) = s.split_once('/') {
        let p: f64 = p.trim().parse().map_err(|_| Error::invalid(format!("bad numerator in '{s}'")))?;
        let q: f64 = q.trim().parse().map_err(|_| Error::invalid(format!("bad denominator in '{s}'")))?;
        if q == 0.0 {
            return Err(Error::invalid(format!("zero denominator in '{s}'")));
        }
        p / q
    } else {
        s.parse::<f64>().map_err(|_| Error::invalid(format!("not a number: '{s}'")))?
    };
    if !v.is_finite() {
        return Err(Error::invalid(format!("non-finite value '{s}'")));
    }
    Ok(v)
}

/// CSV table builder over `csv::Writer`; every field is already formatted text.
#[derive(Debug)]
pub struct Csv {
    w: csv::Writer<Vec<u8>>,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut c =
            Csv { w: csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new()) };
        c.row_str(header);
        c
    }

    pub fn row_str<S: AsRef<str>>(&mut self, fields: &[S]) {
        self.w.write_record(fields.iter().map(|f| f.as_ref())).expect("writing to memory");
    }

    pub fn row_f64(&mut self, fields: &[f64]) {
        self.row_str(&fields.iter().map(|f| fmt_f64(*f)).collect::<Vec<_>>());
    }

    pub fn into_string(self) -> String {
        let bytes = self.w.into_inner().expect("flushing to memory");
        String::from_utf8(bytes).expect("CSV fields are UTF-8")
    }
}

/// Parses CSV text into a header and rows of fields.
pub fn read_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header: Vec<String> =
        rd.headers().map_err(|e| Error::invalid(format!("bad CSV header: {e}")))?.iter().map(str::to_string).collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(Error::invalid("empty CSV"));
    }
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(|e| Error::invalid(format!("bad CSV row: {e}")))?;
        rows.push(rec.iter().map(str::to_string).collect());
    }
    Ok((header, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, -1.0 / 3.0, 1e-300, 6.02214076e23, std::f64::consts::PI] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
        }
        assert_eq!(fmt_f64(0.5), "5.0000000000000000e-1");
    }

    #[test]
    fn rational_literals() {
        assert_eq!(parse_scalar("1/2").unwrap(), 0.5);
        assert_eq!(parse_scalar(" 3 / 4 ").unwrap(), 0.75);
        assert_eq!(parse_scalar("0.25").unwrap(), 0.25);
        assert!(parse_scalar("1/0").is_err());
        assert!(parse_scalar("abc").is_err());
        assert!(parse_scalar("inf").is_err());
    }

    #[test]
    fn csv_round_trip() {
        let mut c = Csv::new(&["a", "b"]);
        c.row_f64(&[0.5, -2.0]);
        let text = c.into_string();
        assert_eq!(text, "a,b\n5.0000000000000000e-1,-2.0000000000000000e0\n");
        let (h, rows) = read_csv(&text).unwrap();
        assert_eq!(h, ["a", "b"]);
        assert_eq!(rows[0][1].parse::<f64>().unwrap(), -2.0);
        assert!(read_csv("a,b\n1\n").is_err());
        assert!(read_csv("").is_err());
        assert_eq!(Csv::new(&["x"]).into_string(), "x\n");
    }
}
