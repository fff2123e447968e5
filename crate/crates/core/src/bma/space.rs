use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::panel::PanelDesign;

use super::gprior::{log_bf, shrinkage, GPriorSpec, Shrinkage};
use super::model::{heredity_valid, log_model_prior, ModelId, ModelPrior, MAX_VARS};
use super::BmaConfig;

/// Smallest admissible ratio of a Cholesky pivot to its Gram diagonal.
const PIVOT_TOL: f64 = 1e-10;

/// Least-squares fit of one model on the demeaned design.
#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    pub columns: Vec<usize>,
    pub beta: Vec<f64>,
    /// Diagonal of `(X'X)⁻¹` for the model's columns.
    pub vdiag: Vec<f64>,
    pub r2: f64,
}

/// Sufficient statistics of a design plus the priors; evaluates models.
#[derive(Debug, Clone)]
pub struct ModelSpace<'a> {
    pub design: &'a PanelDesign,
    pub prior: GPriorSpec,
    pub model_prior: ModelPrior,
    pub heredity: bool,
    gram: Vec<f64>,
    xty: Vec<f64>,
    yty: f64,
    k: usize,
}

impl<'a> ModelSpace<'a> {
    /// Resolves the g-prior from `cfg` against the design size.
    pub fn new(design: &'a PanelDesign, cfg: &BmaConfig) -> Result<Self> {
        let prior = GPriorSpec::resolve(cfg.g_prior, design.n_obs, design.n_vars(), cfg.hyper_a)?;
        Self::with_prior(design, prior, cfg.model_prior, cfg.heredity)
    }

    pub fn with_prior(design: &'a PanelDesign, prior: GPriorSpec, model_prior: ModelPrior, heredity: bool) -> Result<Self> {
        let k = design.n_vars();
        if k > MAX_VARS {
            return Err(Error::Capacity { k, cap: MAX_VARS });
        }
        let yty: f64 = design.y.iter().map(|v| v * v).sum();
        if !(yty > 0.0) {
            return Err(Error::Input("outcome has no variation after demeaning".into()));
        }
        let mut gram = vec![0.0; k * k];
        for i in 0..k {
            for j in i..k {
                let v: f64 = design.x[i].iter().zip(&design.x[j]).map(|(a, b)| a * b).sum();
                gram[i * k + j] = v;
                gram[j * k + i] = v;
            }
        }
        let xty = design
            .x
            .iter()
            .map(|c| c.iter().zip(&design.y).map(|(a, b)| a * b).sum())
            .collect();
        Ok(ModelSpace {
            design,
            prior,
            model_prior,
            heredity,
            gram,
            xty,
            yty,
            k,
        })
    }

    pub fn n_vars(&self) -> usize {
        self.k
    }

    pub fn n_obs(&self) -> usize {
        self.design.n_obs
    }

    pub fn yty(&self) -> f64 {
        self.yty
    }

    pub fn admissible(&self, model: ModelId) -> bool {
        !self.heredity || heredity_valid(model, &self.design.var_meta)
    }

    /// Least-squares fit with coefficient variances.
    pub fn fit(&self, model: ModelId) -> Result<OlsFit> {
        self.solve(model, true)
    }

    /// R² of the model's least-squares fit.
    pub fn r2(&self, model: ModelId) -> Result<f64> {
        self.solve(model, false).map(|f| f.r2)
    }

    fn solve(&self, model: ModelId, with_variance: bool) -> Result<OlsFit> {
        if self.k < MAX_VARS && model.0 >> self.k != 0 {
            return Err(Error::Input(format!("model {model} references columns beyond {}", self.k)));
        }
        let columns = model.columns();
        let p = columns.len();
        if p == 0 {
            return Ok(OlsFit {
                columns,
                beta: vec![],
                vdiag: vec![],
                r2: 0.0,
            });
        }
        if self.design.n_obs <= p + 1 {
            return Err(Error::SingularModel(format!(
                "model {model} has {p} columns for {} observations",
                self.design.n_obs
            )));
        }
        let g = DMatrix::from_fn(p, p, |i, j| self.gram[columns[i] * self.k + columns[j]]);
        let b = DVector::from_fn(p, |i, _| self.xty[columns[i]]);
        let chol = g
            .clone()
            .cholesky()
            .ok_or_else(|| Error::SingularModel(format!("model {model} is not full rank")))?;
        let l = chol.l_dirty();
        for i in 0..p {
            if l[(i, i)] * l[(i, i)] <= PIVOT_TOL * g[(i, i)] {
                return Err(Error::SingularModel(format!(
                    "model {model}: column {} is collinear with the others",
                    self.design.var_meta[columns[i]].name
                )));
            }
        }
        let beta = chol.solve(&b);
        let r2 = (beta.dot(&b) / self.yty).clamp(0.0, 1.0);
        let vdiag = if with_variance {
            let inv = chol.inverse();
            (0..p).map(|i| inv[(i, i)]).collect()
        } else {
            vec![]
        };
        Ok(OlsFit {
            columns,
            beta: beta.iter().copied().collect(),
            vdiag,
            r2,
        })
    }

    pub fn shrinkage(&self, fit: &OlsFit) -> Result<Shrinkage> {
        shrinkage(&self.prior, self.design.n_obs, fit.columns.len(), fit.r2)
    }

    /// Log marginal likelihood relative to the null model.
    pub fn log_marginal_likelihood(&self, model: ModelId) -> Result<f64> {
        let r2 = self.r2(model)?;
        log_bf(&self.prior, self.design.n_obs, model.size(), r2)
    }

    /// Unnormalized log posterior; `None` for models outside the admissible
    /// space or whose columns are linearly dependent.
    pub fn log_posterior(&self, model: ModelId) -> Result<Option<f64>> {
        if !self.admissible(model) {
            return Ok(None);
        }
        match self.log_marginal_likelihood(model) {
            Ok(lml) => Ok(Some(lml + log_model_prior(model, self.k, self.model_prior))),
            Err(Error::SingularModel(_)) => Ok(None),
            Err(e) => Err(e),
        }
    }
}

/// Log marginal likelihood (relative to the null model) of `model` on
/// `design` under a resolved g-prior.
pub fn log_marginal_likelihood(design: &PanelDesign, model: ModelId, prior: &GPriorSpec) -> Result<f64> {
    ModelSpace::with_prior(design, *prior, ModelPrior::Uniform, false)?.log_marginal_likelihood(model)
}
