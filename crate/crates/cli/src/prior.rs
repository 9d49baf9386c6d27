use std::fmt;
use std::str::FromStr;

use usm::priors::cmoe_from_samples;
use usm::PriorModel;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PriorSpec {
    Fixed(PriorModel<f64>),
    /// MOE built from the first `n0` nonzero magnitudes of a stream.
    Cmoe(usize),
}

impl PriorSpec {
    /// Resolves CMOE against `stream`; fixed models pass through.
    pub fn resolve<'a>(&self, stream: impl IntoIterator<Item = &'a f64>) -> usm::Result<PriorModel<f64>> {
        match *self {
            PriorSpec::Fixed(m) => Ok(m),
            PriorSpec::Cmoe(n0) => {
                let head: Vec<f64> = stream.into_iter().copied().filter(|v| *v != 0.0).take(n0).collect();
                cmoe_from_samples(&head, n0).map(PriorModel::Moe)
            }
        }
    }
}

impl fmt::Display for PriorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PriorSpec::Fixed(PriorModel::Laplacian(p)) => write!(f, "laplacian:{}", p.theta()),
            PriorSpec::Fixed(PriorModel::Moe(p)) => write!(f, "moe:{},{}", p.kappa(), p.beta()),
            PriorSpec::Fixed(PriorModel::Joe(p)) => write!(f, "joe:{},{}", p.theta1(), p.theta2()),
            PriorSpec::Cmoe(n0) => write!(f, "cmoe:{n0}"),
        }
    }
}

fn number(s: &str) -> Result<f64, String> {
    s.trim().parse::<f64>().map_err(|_| format!("`{s}` is not a number"))
}

/// Parses `A,B` into two numbers.
pub fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    match s.split_once(',') {
        Some((a, b)) => Ok((number(a)?, number(b)?)),
        None => Err(format!("expected two comma-separated numbers, got `{s}`")),
    }
}

impl FromStr for PriorSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (name, rest) = s
            .split_once(':')
            .ok_or_else(|| format!("expected NAME:PARAMS, got `{s}`"))?;
        let model = match name.trim().to_ascii_lowercase().as_str() {
            "laplacian" => PriorModel::laplacian(number(rest)?),
            "moe" => {
                let (k, b) = parse_pair(rest)?;
                PriorModel::moe(k, b)
            }
            "joe" => {
                let (t1, t2) = parse_pair(rest)?;
                PriorModel::joe(t1, t2)
            }
            "cmoe" => {
                let n0: usize = rest
                    .trim()
                    .parse()
                    .map_err(|_| format!("`{rest}` is not a sample count"))?;
                if n0 == 0 {
                    return Err("cmoe needs n0 >= 1".into());
                }
                return Ok(PriorSpec::Cmoe(n0));
            }
            other => return Err(format!("unknown prior `{other}`; use laplacian, moe, joe or cmoe")),
        };
        model.map(PriorSpec::Fixed).map_err(|e| e.to_string())
    }
}
