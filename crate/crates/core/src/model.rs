//! Risk-neutral market model and option contracts.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::laws::{Atom, JumpLaw, JumpTransform};
use crate::solver::{Coefficient, DiffusionCoefficients, JumpSpec};

/// Geometric Lévy model `dS/S- = r dt + σ(t) dW + dJ` under the pricing
/// measure, where `J` jumps by `c(Z)` at rate `intensity_q` with
/// `Z ~ law_q`.
#[derive(Debug, Clone)]
pub struct LevyModel {
    pub spot: f64,
    pub rate: f64,
    sigma: Coefficient,
    pub intensity_q: f64,
    pub law_q: JumpLaw,
    pub transform: JumpTransform,
    physical_drift: Option<f64>,
}

impl LevyModel {
    pub fn new(
        spot: f64,
        rate: f64,
        sigma: f64,
        intensity_q: f64,
        law_q: JumpLaw,
        transform: JumpTransform,
    ) -> Result<Self> {
        let model = Self {
            spot,
            rate,
            sigma: Coefficient::Constant(sigma),
            intensity_q,
            law_q,
            transform,
            physical_drift: None,
        };
        model.validate()?;
        Ok(model)
    }

    /// Black-Scholes model without jumps.
    pub fn black_scholes(spot: f64, rate: f64, sigma: f64) -> Result<Self> {
        Self::new(
            spot,
            rate,
            sigma,
            0.0,
            JumpLaw::Unit { a: 0.0 },
            JumpTransform::Identity,
        )
    }

    /// Replaces the volatility with a time-dependent `σ(t)`.
    pub fn with_time_varying_sigma(
        mut self,
        sigma: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.sigma = Coefficient::TimeVarying(Arc::new(sigma));
        self
    }

    /// Records a physical appreciation rate. It never enters a price.
    pub fn with_physical_drift(mut self, b: f64) -> Self {
        self.physical_drift = Some(b);
        self
    }

    pub fn physical_drift(&self) -> Option<f64> {
        self.physical_drift
    }

    pub fn sigma(&self) -> &Coefficient {
        &self.sigma
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.spot > 0.0 && self.spot.is_finite()) {
            return Err(Error::validation(
                "model.spot",
                format!("spot {} must be positive", self.spot),
            ));
        }
        if !self.rate.is_finite() {
            return Err(Error::validation("model.rate", "rate must be finite"));
        }
        if let Coefficient::Constant(s) = self.sigma {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::validation(
                    "model.sigma",
                    format!("sigma {s} must be positive"),
                ));
            }
        }
        if !(self.intensity_q >= 0.0 && self.intensity_q.is_finite()) {
            return Err(Error::validation(
                "model.intensity_q",
                format!("intensity {} must be non-negative", self.intensity_q),
            ));
        }
        self.law_q.validate()?;
        if self.intensity_q > 0.0 {
            self.transform.check_limited_liability(&self.law_q)?;
            if !self.kappa()?.is_finite() {
                return Err(Error::validation(
                    "model.transform",
                    "mean relative jump is not finite",
                ));
            }
        }
        Ok(())
    }

    /// Checks `σ(t)` on the horizon for time-dependent volatilities.
    pub fn validate_on(&self, t: f64, maturity: f64) -> Result<()> {
        self.validate()?;
        self.log_diffusion(t, maturity).map(|_| ())
    }

    /// Mean relative jump `κ = E[c(Z)]`.
    pub fn kappa(&self) -> Result<f64> {
        let k = match &self.transform {
            JumpTransform::Identity => self.law_q.moments().0,
            JumpTransform::ExpMinusOne => match self.law_q.mgf(1.0) {
                Some(m) => m - 1.0,
                None => {
                    return Err(Error::validation(
                        "model.transform",
                        format!("E[e^Z] diverges under {}", self.law_q),
                    ))
                }
            },
            JumpTransform::Custom(c) => self.law_q.expect(&|z| c(z)),
        };
        Ok(k)
    }

    /// `∫_t^T σ²(u) du`.
    pub fn integrated_variance(&self, t: f64, maturity: f64) -> f64 {
        match &self.sigma {
            Coefficient::Constant(s) => s * s * (maturity - t),
            Coefficient::TimeVarying(f) => {
                let f = f.clone();
                Coefficient::TimeVarying(Arc::new(move |u| f(u).powi(2))).integral(t, maturity)
            }
        }
    }

    /// `∫_t^T γ_Q(u) du` with `γ_Q = r - σ²/2 - λ̃κ`.
    pub fn integrated_log_drift(&self, t: f64, maturity: f64) -> Result<f64> {
        let tau = maturity - t;
        let jump = if self.intensity_q > 0.0 {
            self.intensity_q * self.kappa()?
        } else {
            0.0
        };
        Ok((self.rate - jump) * tau - 0.5 * self.integrated_variance(t, maturity))
    }

    /// Diffusion coefficients of `ln S`.
    pub fn log_diffusion(&self, t: f64, maturity: f64) -> Result<DiffusionCoefficients> {
        let jump = if self.intensity_q > 0.0 {
            self.intensity_q * self.kappa()?
        } else {
            0.0
        };
        let r = self.rate;
        match &self.sigma {
            Coefficient::Constant(s) => {
                DiffusionCoefficients::constant(r - jump - 0.5 * s * s, s * s)
            }
            Coefficient::TimeVarying(f) => {
                let (fd, fv) = (f.clone(), f.clone());
                let floor = (0..=256)
                    .map(|k| f(t + (maturity - t) * k as f64 / 256.0).powi(2))
                    .fold(f64::INFINITY, f64::min);
                if !(floor > 0.0) {
                    return Err(Error::validation(
                        "model.sigma",
                        "sigma(t) must stay positive",
                    ));
                }
                let c = DiffusionCoefficients::new(
                    Coefficient::time_varying(move |u| r - jump - 0.5 * fd(u).powi(2)),
                    Coefficient::time_varying(move |u| fv(u).powi(2)),
                    floor,
                )?;
                c.validate_on(t, maturity)?;
                Ok(c)
            }
        }
    }

    /// Law of the log-price jump `ln(1 + c(Z))` when it is one of the
    /// closed-form family members: the jump law itself under
    /// `exp_minus_one`, an atom list for discrete laws. `None` for
    /// continuous laws under a nonlinear log jump.
    pub fn log_jump_law(&self) -> Option<JumpLaw> {
        match self.transform {
            JumpTransform::ExpMinusOne => Some(self.law_q.clone()),
            _ => {
                let atoms = self.law_q.atoms(1e-17)?;
                let mut mapped: Vec<Atom> = atoms
                    .iter()
                    .map(|a| Atom::new(self.transform.log_jump(a.location), a.mass))
                    .collect();
                let total: f64 = mapped.iter().map(|a| a.mass).sum();
                mapped.iter_mut().for_each(|a| a.mass /= total);
                Some(JumpLaw::Discrete(mapped))
            }
        }
    }

    /// Jump part of `ln S`, uncompensated (the compensator sits in the drift).
    pub fn log_jump_spec(&self) -> Result<Option<JumpSpec>> {
        if self.intensity_q == 0.0 {
            return Ok(None);
        }
        let spec = match self.log_jump_law() {
            Some(law) => JumpSpec::new(self.intensity_q, law, JumpTransform::Identity)?,
            None => {
                let transform = self.transform.clone();
                JumpSpec::new(
                    self.intensity_q,
                    self.law_q.clone(),
                    JumpTransform::Custom(Arc::new(move |z| transform.log_jump(z))),
                )?
            }
        };
        Ok(Some(spec))
    }

    /// First and second raw moments of the log-price jump.
    pub fn log_jump_moments(&self) -> (f64, f64) {
        match self.log_jump_law() {
            Some(law) => law.moments(),
            None => (
                self.law_q.expect(&|z| self.transform.log_jump(z)),
                self.law_q.expect(&|z| self.transform.log_jump(z).powi(2)),
            ),
        }
    }
}

/// Passes from physical to risk-neutral dynamics. The physical drift `b`
/// does not affect prices; the returned model has the drift `r` and
/// compensated jumps, i.e. log drift `r - σ²/2 - λ̃κ`.
pub fn risk_neutralize(b: f64, model: &LevyModel) -> Result<LevyModel> {
    if !b.is_finite() {
        return Err(Error::validation(
            "model.drift",
            "physical drift must be finite",
        ));
    }
    model.validate()?;
    let mut q = model.clone();
    q.physical_drift = None;
    Ok(q)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ContractKind {
    EuropeanCall,
    EuropeanPut,
    CashOrNothingCall { payout: f64 },
    DownAndOutCall { barrier: f64 },
}

impl ContractKind {
    pub fn name(&self) -> &'static str {
        match self {
            ContractKind::EuropeanCall => "call",
            ContractKind::EuropeanPut => "put",
            ContractKind::CashOrNothingCall { .. } => "digital",
            ContractKind::DownAndOutCall { .. } => "down_and_out_call",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptionContract {
    pub kind: ContractKind,
    pub strike: f64,
    pub maturity: f64,
    pub valuation_time: f64,
}

impl OptionContract {
    pub fn new(
        kind: ContractKind,
        strike: f64,
        maturity: f64,
        valuation_time: f64,
    ) -> Result<Self> {
        let c = Self {
            kind,
            strike,
            maturity,
            valuation_time,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.strike > 0.0 && self.strike.is_finite()) {
            return Err(Error::validation(
                "contract.strike",
                format!("strike {} must be positive", self.strike),
            ));
        }
        if !(self.valuation_time >= 0.0 && self.maturity.is_finite()) {
            return Err(Error::validation(
                "contract.valuation_time",
                format!(
                    "valuation time {} must be non-negative",
                    self.valuation_time
                ),
            ));
        }
        if !(self.maturity > self.valuation_time) {
            return Err(Error::validation(
                "contract.maturity",
                format!(
                    "maturity {} must exceed valuation time {}",
                    self.maturity, self.valuation_time
                ),
            ));
        }
        match self.kind {
            ContractKind::CashOrNothingCall { payout } if !(payout > 0.0 && payout.is_finite()) => {
                Err(Error::validation(
                    "contract.payout",
                    format!("payout {payout} must be positive"),
                ))
            }
            ContractKind::DownAndOutCall { barrier } if !(barrier > 0.0 && barrier.is_finite()) => {
                Err(Error::validation(
                    "contract.barrier",
                    format!("barrier {barrier} must be positive"),
                ))
            }
            _ => Ok(()),
        }
    }

    pub fn tau(&self) -> f64 {
        self.maturity - self.valuation_time
    }

    /// Terminal payoff as a function of the terminal price.
    pub fn payoff(&self, s: f64) -> f64 {
        match self.kind {
            ContractKind::EuropeanCall | ContractKind::DownAndOutCall { .. } => {
                (s - self.strike).max(0.0)
            }
            ContractKind::EuropeanPut => (self.strike - s).max(0.0),
            ContractKind::CashOrNothingCall { payout } => {
                if s > self.strike {
                    payout
                } else {
                    0.0
                }
            }
        }
    }
}
