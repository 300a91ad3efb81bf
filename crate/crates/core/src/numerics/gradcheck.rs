use super::params::{ParamGrads, ParamId, ParamStore};
use super::tape::{Tape, Var};
use crate::error::{Error, Result};

/// Default central-difference step.
pub const GRAD_CHECK_EPS: f64 = 1e-5;

/// Denominator floor for the relative error, so gradients that are
/// numerically zero compare on an absolute scale.
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct ParamCheck {
    pub name: String,
    pub max_relative_error: f64,
    pub max_abs_gradient: f64,
    pub entries: usize,
}

#[derive(Clone, Debug, Default)]
pub struct GradCheckReport {
    pub params: Vec<ParamCheck>,
}

impl GradCheckReport {
    pub fn max_relative_error(&self) -> f64 {
        self.params
            .iter()
            .map(|p| p.max_relative_error)
            .fold(0.0, f64::max)
    }

    pub fn passed(&self, tolerance: f64) -> bool {
        self.max_relative_error() < tolerance
    }

    pub fn worst(&self) -> Option<&ParamCheck> {
        self.params
            .iter()
            .max_by(|a, b| a.max_relative_error.total_cmp(&b.max_relative_error))
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_ERROR_FLOOR)
}

fn evaluate<F>(store: &ParamStore, f: &F) -> Result<f64>
where
    F: Fn(&mut Tape<'_>) -> Result<Var>,
{
    let mut tape = Tape::with_params(store);
    let out = f(&mut tape)?;
    if tape.shape(out) != (1, 1) {
        return Err(Error::Usage(
            "gradient check needs a scalar function".into(),
        ));
    }
    tape.check_finite()?;
    Ok(tape.scalar(out))
}

/// Compares tape gradients of a scalar function against central differences
/// `(f(θ+ε) − f(θ−ε)) / 2ε` for every entry of every parameter.
pub fn grad_check<F>(store: &ParamStore, eps: f64, f: F) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape<'_>) -> Result<Var>,
{
    let analytic = {
        let mut tape = Tape::with_params(store);
        let out = f(&mut tape)?;
        tape.backward(out)?
    };
    grad_check_against(store, eps, &analytic, |s| evaluate(s, &f))
}

/// Central-difference check of `analytic` gradients for a scalar function
/// evaluated on a parameter store.
pub fn grad_check_against<F>(
    store: &ParamStore,
    eps: f64,
    analytic: &ParamGrads,
    f: F,
) -> Result<GradCheckReport>
where
    F: Fn(&ParamStore) -> Result<f64>,
{
    let mut work = store.clone();
    let mut report = GradCheckReport::default();
    for id in store.ids().collect::<Vec<ParamId>>() {
        let n = store.value(id).len();
        let mut worst: f64 = 0.0;
        let mut max_abs: f64 = 0.0;
        for k in 0..n {
            let orig = work.value(id).data()[k];
            work.value_mut(id).data_mut()[k] = orig + eps;
            let plus = f(&work)?;
            work.value_mut(id).data_mut()[k] = orig - eps;
            let minus = f(&work)?;
            work.value_mut(id).data_mut()[k] = orig;
            let numeric = (plus - minus) / (2.0 * eps);
            let a = analytic.get(id).map_or(0.0, |g| g.data()[k]);
            max_abs = max_abs.max(a.abs());
            worst = worst.max(relative_error(a, numeric));
        }
        report.params.push(ParamCheck {
            name: store.name(id).to_string(),
            max_relative_error: worst,
            max_abs_gradient: max_abs,
            entries: n,
        });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::matrix::Matrix;

    #[test]
    fn quadratic_at_three() {
        let mut store = ParamStore::new();
        let x = store.add("x", Matrix::scalar(3.0)).unwrap();
        let report = grad_check(&store, GRAD_CHECK_EPS, |t| {
            let v = t.param(x);
            t.mul(v, v)
        })
        .unwrap();
        assert!(report.max_relative_error() < 1e-8, "{report:?}");
        assert!((report.params[0].max_abs_gradient - 6.0).abs() < 1e-12);
    }

    #[test]
    fn constant_function_has_zero_gradients() {
        let mut store = ParamStore::new();
        store.add("x", Matrix::column(vec![1.0, 2.0])).unwrap();
        let report = grad_check(&store, GRAD_CHECK_EPS, |t| {
            Ok(t.constant(Matrix::scalar(4.0)))
        })
        .unwrap();
        assert_eq!(report.params[0].max_abs_gradient, 0.0);
        assert_eq!(report.max_relative_error(), 0.0);
    }

    #[test]
    fn non_scalar_function_is_usage_error() {
        let mut store = ParamStore::new();
        let x = store.add("x", Matrix::column(vec![1.0, 2.0])).unwrap();
        let err = grad_check(&store, GRAD_CHECK_EPS, |t| Ok(t.param(x))).unwrap_err();
        assert!(matches!(err, Error::Usage(_)));
    }

    #[test]
    fn softmax_cross_entropy_gradient_is_p_minus_onehot() {
        let mut store = ParamStore::new();
        let logits = vec![0.2, -1.3, 0.7, 0.05];
        let z = store.add("z", Matrix::column(logits.clone())).unwrap();
        let target = 2;
        let loss = |t: &mut Tape<'_>| -> Result<Var> {
            let v = t.param(z);
            let p = t.softmax(v, None)?;
            let pt = t.pick(p, target)?;
            let l = t.log(pt);
            Ok(t.scale(l, -1.0))
        };
        let mut tape = Tape::with_params(&store);
        let out = loss(&mut tape).unwrap();
        let g = tape.backward(out).unwrap();
        let p = crate::numerics::softmax(&logits).unwrap();
        for (k, pk) in p.iter().enumerate() {
            let expect = pk - if k == target { 1.0 } else { 0.0 };
            assert!((g.get(z).unwrap().data()[k] - expect).abs() < 1e-12);
        }
        let report = grad_check(&store, GRAD_CHECK_EPS, loss).unwrap();
        assert!(report.max_relative_error() < 1e-6, "{report:?}");
    }
}
