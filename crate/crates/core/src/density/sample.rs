use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Gamma, StandardNormal};

use super::spec::{DensitySpec, Profile, ShellFunction};
use super::SampleSet;
use crate::error::{Error, Result};
use crate::geometry::StarBody;
use crate::vecmath::norm;

/// `n` i.i.d. draws from `spec` using a ChaCha8 stream seeded with `seed`.
pub fn sample_density_seeded(spec: &DensitySpec, n: usize, seed: u64) -> Result<SampleSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(sample_density(spec, n, &mut rng)?.with_source(super::SampleSource { path: None, seed: Some(seed) }))
}

pub fn sample_density<R: Rng + ?Sized>(spec: &DensitySpec, n: usize, rng: &mut R) -> Result<SampleSet> {
    if n == 0 {
        return Err(Error::invalid("sample count must be at least 1"));
    }
    spec.validate()?;
    let d = spec.dim();
    let mut out = Vec::with_capacity(n * d);
    let mut sampler = Sampler::build(spec)?;
    for _ in 0..n {
        sampler.draw(rng, &mut out)?;
    }
    SampleSet::new(d, out)
}

enum Sampler {
    Gaussian { mean: Vec<f64>, chol: nalgebra::DMatrix<f64> },
    Mixture { index: WeightedIndex<f64>, parts: Vec<Sampler> },
    Uniform { body: StarBody, radius: f64 },
    Gauge { body: StarBody, radius: f64, law: RadialLaw },
    Shell { dim: usize, f: ShellFunction, radius: f64 },
}

/// Law of `t` with density proportional to `t^{d-1} ψ(t)`.
enum RadialLaw {
    Gamma(Gamma<f64>),
    Chi(usize),
    Power(f64),
    BetaPrime(Beta<f64>),
}

impl RadialLaw {
    fn new(profile: Profile, d: usize) -> Result<Self> {
        let df = d as f64;
        Ok(match profile {
            Profile::Exponential => RadialLaw::Gamma(Gamma::new(df, 1.0).map_err(|e| Error::Numerical(e.to_string()))?),
            Profile::HalfGaussian => RadialLaw::Chi(d),
            Profile::Indicator => RadialLaw::Power(1.0 / df),
            Profile::PowerLaw { exponent: s } => {
                if s <= df {
                    return Err(Error::NonIntegrable(format!(
                        "power-law exponent {s} gives infinite mass in dimension {d}"
                    )));
                }
                // t/(1+t) ~ Beta(d, s-d)
                RadialLaw::BetaPrime(Beta::new(df, s - df).map_err(|e| Error::Numerical(e.to_string()))?)
            }
        })
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            RadialLaw::Gamma(g) => g.sample(rng),
            RadialLaw::Chi(d) => (0..*d).map(|_| rng.sample::<f64, _>(StandardNormal).powi(2)).sum::<f64>().sqrt(),
            RadialLaw::Power(e) => rng.random::<f64>().powf(*e),
            RadialLaw::BetaPrime(b) => {
                let v: f64 = b.sample(rng);
                v / (1.0 - v)
            }
        }
    }
}

impl Sampler {
    fn build(spec: &DensitySpec) -> Result<Self> {
        Ok(match spec {
            DensitySpec::Gaussian { mean, covariance } => {
                let chol = covariance
                    .clone()
                    .cholesky()
                    .ok_or_else(|| Error::invalid("covariance must be positive definite"))?
                    .l();
                Sampler::Gaussian { mean: mean.clone(), chol }
            }
            DensitySpec::Mixture { weights, components } => Sampler::Mixture {
                index: WeightedIndex::new(weights).map_err(|e| Error::invalid(e.to_string()))?,
                parts: components.iter().map(Sampler::build).collect::<Result<_>>()?,
            },
            DensitySpec::UniformOverBody { body } => {
                Sampler::Uniform { body: body.clone(), radius: body.circumradius() }
            }
            DensitySpec::GaugeInduced { body, profile, .. } => Sampler::Gauge {
                body: body.clone(),
                radius: body.circumradius(),
                law: RadialLaw::new(*profile, body.dim())?,
            },
            DensitySpec::UniformShell { dim, inner } => {
                let s = inner.sup_bound();
                let radius = (1.0 + s.powi(*dim as i32 + 1)).powf(1.0 / (*dim as f64 + 1.0));
                Sampler::Shell { dim: *dim, f: inner.clone(), radius }
            }
        })
    }

    fn draw<R: Rng + ?Sized>(&mut self, rng: &mut R, out: &mut Vec<f64>) -> Result<()> {
        match self {
            Sampler::Gaussian { mean, chol } => {
                let d = mean.len();
                let z: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
                for i in 0..d {
                    out.push(mean[i] + (0..=i).map(|j| chol[(i, j)] * z[j]).sum::<f64>());
                }
            }
            Sampler::Mixture { index, parts } => {
                let k = index.sample(rng);
                parts[k].draw(rng, out)?;
            }
            Sampler::Uniform { body, radius } => {
                out.extend(uniform_in_body(body, *radius, rng)?);
            }
            Sampler::Gauge { body, radius, law } => {
                // a uniform point of L projected to ∂L has direction law ∝ ρ_L^d
                let y = loop {
                    let y = uniform_in_body(body, *radius, rng)?;
                    let g = body.gauge(&y)?;
                    if g > 0.0 {
                        break y.iter().map(|c| c / g).collect::<Vec<f64>>();
                    }
                };
                let t = law.draw(rng);
                out.extend(y.iter().map(|c| c * t));
            }
            Sampler::Shell { dim, f, radius } => loop {
                let x = uniform_in_ball(*dim, *radius, rng);
                let r = norm(&x);
                if r == 0.0 {
                    continue;
                }
                let u: Vec<f64> = x.iter().map(|c| c / r).collect();
                if r >= f.eval(&u) && r <= f.outer(&u, *dim) {
                    out.extend(x);
                    break;
                }
            },
        }
        Ok(())
    }
}

fn uniform_in_ball<R: Rng + ?Sized>(d: usize, radius: f64, rng: &mut R) -> Vec<f64> {
    loop {
        let z: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let s = norm(&z);
        if s > 0.0 {
            let r = radius * rng.random::<f64>().powf(1.0 / d as f64);
            return z.iter().map(|c| c * r / s).collect();
        }
    }
}

/// Rejection from the circumscribed ball.
pub(crate) fn uniform_in_body<R: Rng + ?Sized>(body: &StarBody, radius: f64, rng: &mut R) -> Result<Vec<f64>> {
    let d = body.dim();
    for _ in 0..10_000_000 {
        let x = uniform_in_ball(d, radius, rng);
        if body.contains(&x)? {
            return Ok(x);
        }
    }
    Err(Error::Numerical("rejection sampler failed to hit the body".into()))
}
