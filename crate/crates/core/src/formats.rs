//! On-disk formats: plain-text sample files and JSON coefficient files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::Coefficients;
use crate::params::Rational;
use crate::scalar::Real;

pub const SAMPLES_HEADER: &str = "# fourex-samples v1";
pub const COEFFS_SCHEMA: &str = "fourex-coeffs-v1";

/// `f(l/m)` for `l = -m..=m`.
///
/// ```text
/// # fourex-samples v1, m=2
/// -2 0.25
/// -1 0.0625
/// ...
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct SampleFile {
    pub m: usize,
    pub values: Vec<f64>,
}

impl SampleFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| Error::Parse("empty sample file".into()))?;
        let m = header
            .trim()
            .strip_prefix(SAMPLES_HEADER)
            .and_then(|rest| rest.trim().strip_prefix(','))
            .and_then(|rest| rest.trim().strip_prefix("m="))
            .and_then(|v| v.trim().parse::<usize>().ok())
            .ok_or_else(|| Error::Parse(format!("bad header '{header}', expected '{SAMPLES_HEADER}, m=<int>'")))?;
        let mut values = Vec::with_capacity(2 * m + 1);
        let mut expected = -(m as i64);
        for (no, line) in lines {
            let mut fields = line.split_whitespace();
            let (l, v) = match (fields.next(), fields.next(), fields.next()) {
                (Some(l), Some(v), None) => (l, v),
                _ => return Err(Error::Parse(format!("line {}: expected '<l> <value>'", no + 1))),
            };
            let l: i64 = l.parse().map_err(|_| Error::Parse(format!("line {}: bad index '{l}'", no + 1)))?;
            let v: f64 = v.parse().map_err(|_| Error::Parse(format!("line {}: bad value '{v}'", no + 1)))?;
            if l != expected {
                return Err(Error::Parse(format!("line {}: index {l} out of sequence, expected {expected}", no + 1)));
            }
            if !v.is_finite() {
                return Err(Error::Parse(format!("line {}: non-finite value", no + 1)));
            }
            values.push(v);
            expected += 1;
        }
        if values.len() != 2 * m + 1 {
            return Err(Error::Parse(format!("expected {} samples, found {}", 2 * m + 1, values.len())));
        }
        Ok(SampleFile { m, values })
    }

    pub fn render(&self) -> String {
        let mut out = format!("{SAMPLES_HEADER}, m={}\n", self.m);
        for (l, v) in (-(self.m as i64)..).zip(&self.values) {
            let _ = writeln!(out, "{l} {v:.16e}");
        }
        out
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        Ok(fs::write(path, self.render())?)
    }
}

/// JSON coefficient file `{schema, T, n, re, im}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientFile {
    pub schema: String,
    #[serde(rename = "T", with = "crate::params::rational_serde")]
    pub t: Rational,
    pub n: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl CoefficientFile {
    pub fn from_coefficients<F: Real>(c: &Coefficients<F>) -> Self {
        CoefficientFile {
            schema: COEFFS_SCHEMA.into(),
            t: c.t,
            n: c.half_bandwidth(),
            re: c.values.iter().map(|z| z.re.to_f64_lossy()).collect(),
            im: c.values.iter().map(|z| z.im.to_f64_lossy()).collect(),
        }
    }

    pub fn to_coefficients<F: Real>(&self) -> Result<Coefficients<F>> {
        self.validate()?;
        let values = self.re.iter().zip(&self.im).map(|(&r, &i)| Complex::new(F::of(r), F::of(i))).collect();
        Ok(Coefficients::new(values, self.t))
    }

    fn validate(&self) -> Result<()> {
        if self.schema != COEFFS_SCHEMA {
            return Err(Error::Parse(format!("unknown schema '{}'", self.schema)));
        }
        let len = 2 * self.n + 1;
        if self.re.len() != len || self.im.len() != len {
            return Err(Error::Parse(format!(
                "expected {len} coefficients, found re={} im={}",
                self.re.len(),
                self.im.len()
            )));
        }
        if self.t <= Rational::from_integer(1) {
            return Err(Error::TleOne(self.t.to_string()));
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let file: CoefficientFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        file.validate()?;
        Ok(file)
    }

    pub fn render(&self) -> String {
        serde_json::to_string_pretty(self).expect("coefficient file serializes")
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        Ok(fs::write(path, self.render() + "\n")?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn samples_round_trip() {
        let f = SampleFile { m: 2, values: vec![4.0, 1.0, 0.0, 1.0, 1.0 / 3.0] };
        let text = f.render();
        assert!(text.starts_with("# fourex-samples v1, m=2\n-2 "));
        assert_eq!(SampleFile::parse(&text).unwrap(), f);
    }

    #[test]
    fn samples_rejected() {
        let bad = [
            "",
            "# other\n",
            "# fourex-samples v1, m=1\n-1 0\n1 0\n0 0\n",
            "# fourex-samples v1, m=1\n-1 0\n0 0\n",
            "# fourex-samples v1, m=1\n-1 0\n0 x\n1 0\n",
            "# fourex-samples v1, m=1\n-1 0\n0 0 0\n1 0\n",
            "# fourex-samples v1, m=1\n-1 0\n0 inf\n1 0\n",
        ];
        for text in bad {
            assert!(matches!(SampleFile::parse(text), Err(Error::Parse(_))), "{text:?}");
        }
    }

    #[test]
    fn coefficients_round_trip() {
        let c = Coefficients::<f64>::new(
            vec![Complex::new(0.1, -0.2), Complex::new(1.0 / 3.0, 0.0), Complex::new(-7e-300, 5.0)],
            Rational::new(19, 5),
        );
        let file = CoefficientFile::from_coefficients(&c);
        let text = file.render();
        assert!(text.contains("\"T\": \"19/5\""));
        assert!(text.contains("\"schema\": \"fourex-coeffs-v1\""));
        let back = CoefficientFile::parse(&text).unwrap().to_coefficients::<f64>().unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn coefficients_rejected() {
        let ok = r#"{"schema":"fourex-coeffs-v1","T":"2","n":1,"re":[0,1,0],"im":[0,0,0]}"#;
        assert!(CoefficientFile::parse(ok).is_ok());
        for bad in [
            r#"{"schema":"v0","T":"2","n":1,"re":[0,1,0],"im":[0,0,0]}"#,
            r#"{"schema":"fourex-coeffs-v1","T":"2","n":2,"re":[0,1,0],"im":[0,0,0]}"#,
            r#"{"schema":"fourex-coeffs-v1","T":"1","n":1,"re":[0,1,0],"im":[0,0,0]}"#,
            r#"{"schema":"fourex-coeffs-v1","T":"2","n":1}"#,
        ] {
            assert!(CoefficientFile::parse(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn io_errors_are_reported() {
        assert!(matches!(SampleFile::read("/nonexistent/fourex.txt"), Err(Error::Io(_))));
    }
}
