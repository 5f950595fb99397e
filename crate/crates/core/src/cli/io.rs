//! JSON fixtures for channels and ensembles, and CSV number formatting.
//!
//! Complex entries are `[re, im]` pairs; matrices are lists of rows.

use std::fs;
use std::path::Path;

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::channel::{self, KrausChannel, CPTP_TOL};
use crate::error::{Error, Result};
use crate::matfun::{ComplexMatrix, DEFAULT_EIG_FLOOR};
use crate::states::{DensityMatrix, Ensemble, PureEnsemble, PureState, INPUT_TOL};

pub type JsonComplex = [f64; 2];
pub type JsonMatrix = Vec<Vec<JsonComplex>>;

fn to_json_matrix(a: &ComplexMatrix) -> JsonMatrix {
    a.row_iter()
        .map(|row| row.iter().map(|z| [z.re, z.im]).collect())
        .collect()
}

fn from_json_matrix(rows: &JsonMatrix, expect: (usize, usize)) -> Result<ComplexMatrix> {
    if rows.len() != expect.0 || rows.iter().any(|r| r.len() != expect.1) {
        return Err(Error::DimensionMismatch(format!(
            "expected a {}x{} matrix",
            expect.0, expect.1
        )));
    }
    Ok(ComplexMatrix::from_row_iterator(
        expect.0,
        expect.1,
        rows.iter()
            .flatten()
            .map(|&[re, im]| Complex64::new(re, im)),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelJson {
    pub input_dim: usize,
    pub output_dim: usize,
    pub kraus_rank: usize,
    /// `operators[k][row][col]`, each `output_dim × input_dim`.
    pub operators: Vec<JsonMatrix>,
}

impl From<&KrausChannel> for ChannelJson {
    fn from(ch: &KrausChannel) -> Self {
        Self {
            input_dim: ch.input_dim(),
            output_dim: ch.output_dim(),
            kraus_rank: ch.kraus_rank(),
            operators: ch.operators().iter().map(to_json_matrix).collect(),
        }
    }
}

impl ChannelJson {
    /// Exact when the file is complete to [`CPTP_TOL`]; files within
    /// [`INPUT_TOL`] are re-projected.
    pub fn to_channel(&self) -> Result<KrausChannel> {
        if self.operators.len() != self.kraus_rank {
            return Err(Error::DimensionMismatch(format!(
                "kraus_rank {} but {} operators",
                self.kraus_rank,
                self.operators.len()
            )));
        }
        let ops = self
            .operators
            .iter()
            .map(|m| from_json_matrix(m, (self.output_dim, self.input_dim)))
            .collect::<Result<Vec<_>>>()?;
        match KrausChannel::with_tolerance(ops.clone(), CPTP_TOL) {
            Ok(ch) => Ok(ch),
            Err(Error::NotTracePreserving { residual, .. }) if residual < INPUT_TOL => {
                channel::project_cptp(&ops, DEFAULT_EIG_FLOOR)
            }
            Err(e) => Err(e),
        }
    }
}

/// Either pure-state vectors or general density matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleJson {
    pub dim: usize,
    pub probabilities: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vectors: Option<Vec<Vec<JsonComplex>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density_matrices: Option<Vec<JsonMatrix>>,
}

impl From<&PureEnsemble> for EnsembleJson {
    fn from(e: &PureEnsemble) -> Self {
        Self {
            dim: e.dim(),
            probabilities: e.probabilities().to_vec(),
            vectors: Some(
                e.states()
                    .iter()
                    .map(|s| s.amplitudes().iter().map(|z| [z.re, z.im]).collect())
                    .collect(),
            ),
            density_matrices: None,
        }
    }
}

impl From<&Ensemble> for EnsembleJson {
    fn from(e: &Ensemble) -> Self {
        Self {
            dim: e.dim(),
            probabilities: e.probabilities().to_vec(),
            vectors: None,
            density_matrices: Some(
                e.states()
                    .iter()
                    .map(|s| to_json_matrix(s.matrix()))
                    .collect(),
            ),
        }
    }
}

impl EnsembleJson {
    /// Only valid when the file stores state vectors.
    pub fn to_pure_ensemble(&self) -> Result<PureEnsemble> {
        let vectors = self
            .vectors
            .as_ref()
            .ok_or_else(|| Error::InvalidDensity("ensemble file has no state vectors".into()))?;
        let states = vectors
            .iter()
            .map(|v| {
                if v.len() != self.dim {
                    return Err(Error::DimensionMismatch(format!(
                        "state vector of length {}, ensemble dimension {}",
                        v.len(),
                        self.dim
                    )));
                }
                PureState::new(DVector::from_iterator(
                    self.dim,
                    v.iter().map(|&[re, im]| Complex64::new(re, im)),
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        PureEnsemble::new(self.probabilities.clone(), states)
    }

    pub fn to_ensemble(&self) -> Result<Ensemble> {
        match (&self.vectors, &self.density_matrices) {
            (Some(_), None) => Ok(self.to_pure_ensemble()?.to_ensemble()),
            (None, Some(mats)) => {
                let states = mats
                    .iter()
                    .map(|m| {
                        DensityMatrix::new(from_json_matrix(m, (self.dim, self.dim))?, INPUT_TOL)
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ensemble::new(self.probabilities.clone(), states)
            }
            _ => Err(Error::InvalidDensity(
                "ensemble file needs exactly one of `vectors` or `density_matrices`".into(),
            )),
        }
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.display().to_string(),
        source,
    })
}

pub fn to_json_string<T: Serialize>(value: &T) -> String {
    // Plain data types only; serialization cannot fail.
    let mut s = serde_json::to_string_pretty(value).expect("serializable value");
    s.push('\n');
    s
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|source| Error::Io {
            path: parent.display().to_string(),
            source,
        })?;
    }
    fs::write(path, contents).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Formats like C's `%.12g`: 12 significant digits, trailing zeros removed,
/// scientific notation outside `[1e-5, 1e12)`.
pub fn fmt_float(x: f64) -> String {
    const SIG: i32 = 12;
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{:.*e}", (SIG - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-5..SIG).contains(&exp) {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (SIG - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::random_channel;
    use crate::cli::streams::random_ensemble;
    use proptest::prelude::*;

    #[test]
    fn float_format() {
        assert_eq!(fmt_float(0.0), "0");
        assert_eq!(fmt_float(1.0), "1");
        assert_eq!(fmt_float(0.5), "0.5");
        assert_eq!(fmt_float(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_float(-2.0 / 3.0), "-0.666666666667");
        assert_eq!(fmt_float(123456.789), "123456.789");
        assert_eq!(fmt_float(1.5e-7), "1.5e-07");
        assert_eq!(fmt_float(2.0e15), "2e+15");
        assert_eq!(fmt_float(0.0001), "0.0001");
        assert_eq!(fmt_float(f64::NAN), "nan");
    }

    #[test]
    fn channel_round_trip_is_exact() {
        let ch = random_channel(3, 4, 5, 11).unwrap();
        let text = to_json_string(&ChannelJson::from(&ch));
        let back: ChannelJson = serde_json::from_str(&text).unwrap();
        let ch2 = back.to_channel().unwrap();
        for (a, b) in ch.operators().iter().zip(ch2.operators()) {
            assert!((a - b).iter().all(|z| z.norm() <= 1e-15));
        }
    }

    #[test]
    fn ensemble_round_trip() {
        let e = random_ensemble(3, 3, 12).unwrap();
        let text = to_json_string(&EnsembleJson::from(&e));
        let back: EnsembleJson = serde_json::from_str(&text).unwrap();
        let e2 = back.to_pure_ensemble().unwrap();
        assert_eq!(e.probabilities(), e2.probabilities());
        for (a, b) in e.states().iter().zip(e2.states()) {
            assert!((a.amplitudes() - b.amplitudes())
                .iter()
                .all(|z| z.norm() <= 1e-15));
        }

        let mixed = e.to_ensemble();
        let text = to_json_string(&EnsembleJson::from(&mixed));
        let back: EnsembleJson = serde_json::from_str(&text).unwrap();
        let m2 = back.to_ensemble().unwrap();
        for (a, b) in mixed.states().iter().zip(m2.states()) {
            assert!((a.matrix() - b.matrix()).iter().all(|z| z.norm() <= 1e-15));
        }
    }

    #[test]
    fn slightly_incomplete_channel_is_reprojected() {
        let ch = random_channel(2, 2, 2, 3).unwrap();
        let mut json = ChannelJson::from(&ch);
        json.operators[0][0][0][0] += 1e-9;
        let loaded = json.to_channel().unwrap();
        assert!(loaded.completeness_residual() < 1e-10);

        json.operators[0][0][0][0] += 1e-3;
        assert!(matches!(
            json.to_channel(),
            Err(Error::NotTracePreserving { .. })
        ));
    }

    #[test]
    fn malformed_shapes_are_rejected() {
        let ch = random_channel(2, 3, 2, 3).unwrap();
        let mut json = ChannelJson::from(&ch);
        json.operators[1].pop();
        assert!(matches!(
            json.to_channel(),
            Err(Error::DimensionMismatch(_))
        ));

        let e = random_ensemble(2, 2, 1).unwrap();
        let mut json = EnsembleJson::from(&e);
        json.density_matrices = Some(vec![]);
        assert!(json.to_ensemble().is_err());
    }

    proptest! {
        #[test]
        fn float_format_parses_back_to_12_digits(x in -1e6f64..1e6) {
            let parsed: f64 = fmt_float(x).parse().unwrap();
            prop_assert!((parsed - x).abs() <= 1e-11 * x.abs().max(1e-300));
        }

        #[test]
        fn random_channels_round_trip(seed in 0u64..10_000, n in 1usize..4, m in 1usize..4) {
            let k = n.div_ceil(m) + 1;
            let ch = random_channel(n, m, k, seed).unwrap();
            let text = to_json_string(&ChannelJson::from(&ch));
            let back: ChannelJson = serde_json::from_str(&text).unwrap();
            prop_assert_eq!(back.to_channel().unwrap(), ch);
        }
    }
}
