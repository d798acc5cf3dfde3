use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::plant::{CUT_IN_WIND, RATED_WIND};

/// Largest wind speed a profile may contain; the partial-load range is open at rated.
pub const MAX_PROFILE_WIND: f64 = RATED_WIND - 1e-9;

/// Levels of the step sequence, each held for an equal share of the duration.
pub const STEP_LEVELS: [f64; 6] = [6.0, 7.5, 9.5, 10.5, 8.0, 5.0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WindKind {
    Constant(f64),
    Steps,
    Turbulent(TurbulenceParams),
}

/// Mean wind plus an Ornstein–Uhlenbeck fluctuation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TurbulenceParams {
    pub mean: f64,
    pub std: f64,
    pub time_constant: f64,
}

impl Default for TurbulenceParams {
    fn default() -> Self {
        TurbulenceParams {
            mean: 8.5,
            std: 0.5,
            time_constant: 2.0,
        }
    }
}

impl FromStr for WindKind {
    type Err = Error;

    /// Accepts `constant:V`, `steps` and `turbulent` or `turbulent:MEAN`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n.trim(), Some(a.trim())),
            None => (s.trim(), None),
        };
        let number = |a: &str| {
            a.parse::<f64>()
                .map_err(|_| Error::Config(format!("invalid wind speed '{a}' in '{s}'")))
        };
        match (name, arg) {
            ("constant", Some(a)) => Ok(WindKind::Constant(number(a)?)),
            ("constant", None) => Err(Error::Config("constant wind needs a speed, e.g. constant:7".into())),
            ("steps", None) => Ok(WindKind::Steps),
            ("turbulent", None) => Ok(WindKind::Turbulent(TurbulenceParams::default())),
            ("turbulent", Some(a)) => Ok(WindKind::Turbulent(TurbulenceParams {
                mean: number(a)?,
                ..TurbulenceParams::default()
            })),
            _ => Err(Error::Config(format!("unknown wind profile '{s}'"))),
        }
    }
}

impl fmt::Display for WindKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WindKind::Constant(v) => write!(f, "constant:{v}"),
            WindKind::Steps => f.write_str("steps"),
            WindKind::Turbulent(tp) => write!(f, "turbulent:{}", tp.mean),
        }
    }
}

/// Wind speed samples at the controller rate.
#[derive(Debug, Clone, PartialEq)]
pub struct WindProfile {
    pub kind: WindKind,
    pub seed: u64,
    pub t_s: f64,
    pub t: Vec<f64>,
    pub v: Vec<f64>,
}

impl WindProfile {
    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }

    /// Zero-order hold of the samples; times past the end hold the last value.
    pub fn at(&self, t: f64) -> f64 {
        if self.v.is_empty() {
            return f64::NAN;
        }
        let k = (t / self.t_s + 1e-9).floor().max(0.0) as usize;
        self.v[k.min(self.v.len() - 1)]
    }

    pub fn mean(&self) -> f64 {
        self.v.iter().sum::<f64>() / self.v.len() as f64
    }

    pub fn std(&self) -> f64 {
        let m = self.mean();
        (self.v.iter().map(|v| (v - m).powi(2)).sum::<f64>() / self.v.len() as f64).sqrt()
    }
}

/// Builds a profile of `round(duration / t_s)` samples.
pub fn generate_wind(kind: WindKind, seed: u64, duration: f64, t_s: f64) -> Result<WindProfile> {
    if !(duration >= 0.0 && duration.is_finite()) {
        return Err(Error::Config(format!("duration must be nonnegative, got {duration}")));
    }
    if !(t_s > 0.0 && t_s.is_finite()) {
        return Err(Error::Config(format!("sample time must be positive, got {t_s}")));
    }
    let n = (duration / t_s).round() as usize;
    let t: Vec<f64> = (0..n).map(|k| k as f64 * t_s).collect();

    let v = match kind {
        WindKind::Constant(level) => {
            if !(CUT_IN_WIND..RATED_WIND).contains(&level) {
                return Err(Error::OutOfRange {
                    v: level,
                    min: CUT_IN_WIND,
                    max: RATED_WIND,
                });
            }
            vec![level; n]
        }
        WindKind::Steps => {
            let segment = n.div_ceil(STEP_LEVELS.len()).max(1);
            (0..n).map(|k| STEP_LEVELS[(k / segment).min(STEP_LEVELS.len() - 1)]).collect()
        }
        WindKind::Turbulent(tp) => {
            if !(tp.std >= 0.0 && tp.time_constant > 0.0 && tp.mean.is_finite()) {
                return Err(Error::Config(format!("invalid turbulence parameters {tp:?}")));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = (-t_s / tp.time_constant).exp();
            let drive = tp.std * (1.0 - a * a).sqrt();
            let z0: f64 = StandardNormal.sample(&mut rng);
            let mut x = tp.std * z0;
            let mut out = Vec::with_capacity(n);
            for _ in 0..n {
                out.push((tp.mean + x).clamp(CUT_IN_WIND, MAX_PROFILE_WIND));
                let z: f64 = StandardNormal.sample(&mut rng);
                x = a * x + drive * z;
            }
            out
        }
    };
    Ok(WindProfile { kind, seed, t_s, t, v })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_profile() {
        let w = generate_wind(WindKind::Constant(7.0), 0, 60.0, 0.05).unwrap();
        assert_eq!(w.len(), 1200);
        assert!(w.v.iter().all(|&v| v == 7.0));
        assert_eq!(w.t[1199], 1199.0 * 0.05);
    }

    #[test]
    fn steps_cross_switch_and_stay_in_range() {
        let w = generate_wind(WindKind::Steps, 0, 120.0, 0.05).unwrap();
        assert!(w.v.iter().any(|&v| v < 8.7) && w.v.iter().any(|&v| v >= 8.7));
        assert!(w.v.iter().all(|&v| (4.0..11.0).contains(&v)));
        assert_eq!(w.v[0], 6.0);
        assert_eq!(*w.v.last().unwrap(), 5.0);
    }

    #[test]
    fn turbulence_is_deterministic_per_seed() {
        let k = WindKind::Turbulent(TurbulenceParams::default());
        let a = generate_wind(k, 11, 100.0, 0.05).unwrap();
        let b = generate_wind(k, 11, 100.0, 0.05).unwrap();
        let c = generate_wind(k, 12, 100.0, 0.05).unwrap();
        assert_eq!(a.v.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.v.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        assert_ne!(a.v, c.v);
    }

    #[test]
    fn turbulence_statistics() {
        let k = WindKind::Turbulent(TurbulenceParams::default());
        for seed in 0..5 {
            let w = generate_wind(k, seed, 600.0, 0.05).unwrap();
            let s = w.std();
            assert!((0.3..=0.7).contains(&s), "seed {seed}: std {s}");
            assert!(w.v.iter().all(|&v| (4.0..11.0).contains(&v)));
        }
    }

    #[test]
    fn clamping_keeps_envelope() {
        let k = WindKind::Turbulent(TurbulenceParams { mean: 10.8, std: 2.0, time_constant: 2.0 });
        let w = generate_wind(k, 3, 200.0, 0.05).unwrap();
        assert!(w.v.iter().all(|&v| (4.0..11.0).contains(&v)));
        assert!(w.v.contains(&MAX_PROFILE_WIND));
    }

    #[test]
    fn parse_and_errors() {
        assert_eq!("constant:7".parse::<WindKind>().unwrap(), WindKind::Constant(7.0));
        assert_eq!("steps".parse::<WindKind>().unwrap(), WindKind::Steps);
        match "turbulent:9".parse::<WindKind>().unwrap() {
            WindKind::Turbulent(tp) => assert_eq!(tp.mean, 9.0),
            other => panic!("{other:?}"),
        }
        assert!("constant".parse::<WindKind>().is_err());
        assert!("gusty".parse::<WindKind>().is_err());
        assert!(generate_wind(WindKind::Constant(12.0), 0, 1.0, 0.05).is_err());
        assert!(generate_wind(WindKind::Steps, 0, -1.0, 0.05).is_err());
        assert!(generate_wind(WindKind::Steps, 0, 0.0, 0.05).unwrap().is_empty());
    }

    #[test]
    fn zero_order_hold_lookup() {
        let w = generate_wind(WindKind::Steps, 0, 6.0, 1.0).unwrap();
        assert_eq!(w.at(0.0), 6.0);
        assert_eq!(w.at(0.99), 6.0);
        assert_eq!(w.at(1.0), 7.5);
        assert_eq!(w.at(100.0), 5.0);
    }
}
