use super::{ParamStore, Tensor};

/// Worst coordinate found by [`grad_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub param: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub coords_checked: usize,
}

/// Compares `analytic` gradients against central differences of `f`.
///
/// Relative error per coordinate is `|a − n| / max(|a|, |n|, floor)`; the
/// floor keeps coordinates whose true derivative is ~0 from reporting pure
/// rounding noise as a large relative error.
pub fn grad_check(
    params: &ParamStore,
    analytic: &[Tensor],
    eps: f64,
    floor: f64,
    f: impl Fn(&ParamStore) -> f64,
) -> GradCheckReport {
    assert!(
        (1e-8..=1e-4).contains(&eps),
        "finite-difference step {eps} outside [1e-8, 1e-4]"
    );
    assert_eq!(analytic.len(), params.len());
    let mut work = params.clone();
    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        param: String::new(),
        index: 0,
        analytic: 0.0,
        numeric: 0.0,
        coords_checked: 0,
    };
    for id in params.ids() {
        let n = params.get(id).len();
        for k in 0..n {
            let orig = params.get(id).data()[k];
            work.get_mut(id).data_mut()[k] = orig + eps;
            let plus = f(&work);
            work.get_mut(id).data_mut()[k] = orig - eps;
            let minus = f(&work);
            work.get_mut(id).data_mut()[k] = orig;

            let numeric = (plus - minus) / (2.0 * eps);
            let a = analytic[id.index()].data()[k];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(floor);
            report.coords_checked += 1;
            if rel > report.max_rel_err || report.param.is_empty() {
                report = GradCheckReport {
                    max_rel_err: rel.max(report.max_rel_err),
                    param: params.name(id).to_string(),
                    index: k,
                    analytic: a,
                    numeric,
                    coords_checked: report.coords_checked,
                };
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Tape;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Tensor {
        Tensor::new(vec![r, c], (0..r * c).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    /// Runs `build` on a fresh tape and returns (loss, grads).
    fn eval(
        params: &ParamStore,
        build: &dyn Fn(&mut Tape, &crate::numerics::BoundParams) -> crate::numerics::Var,
    ) -> (f64, Vec<Tensor>) {
        let mut tape = Tape::new();
        let bound = params.bind(&mut tape);
        let loss = build(&mut tape, &bound);
        let value = tape.value(loss).data()[0];
        let mut g = tape.backward(loss).unwrap();
        (value, bound.collect(&tape, &mut g))
    }

    #[test]
    fn quadratic_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut params = ParamStore::new();
        let x = params.insert("x", random(&mut rng, 1, 4));
        let m = params.insert("m", random(&mut rng, 4, 4));
        let build = |tape: &mut Tape, b: &crate::numerics::BoundParams| {
            let xt = tape.transpose(b.var(x)).unwrap();
            let mx = tape.matmul(b.var(m), xt).unwrap();
            tape.matmul(b.var(x), mx).unwrap()
        };
        let (_, grads) = eval(&params, &build);
        let r = grad_check(&params, &grads, 1e-5, 1e-6, |p| eval(p, &build).0);
        assert!(r.max_rel_err < 1e-8, "{r:?}");
    }

    #[test]
    fn logdet_of_spd() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let b = random(&mut rng, 4, 4);
        let spd = b.matmul_t(&b).zip_map(&Tensor::eye(4), |x, i| x + 0.5 * i);
        let mut params = ParamStore::new();
        let a = params.insert("a", spd);
        let build = |tape: &mut Tape, bp: &crate::numerics::BoundParams| tape.logdet(bp.var(a)).unwrap().0;
        let (_, grads) = eval(&params, &build);
        let r = grad_check(&params, &grads, 1e-6, 1e-6, |p| eval(p, &build).0);
        assert!(r.max_rel_err < 1e-5, "{r:?}");
    }

    #[test]
    fn sigmoid_bilinear_classifier() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut params = ParamStore::new();
        let e1 = params.insert("e1", random(&mut rng, 1, 3));
        let e2 = params.insert("e2", random(&mut rng, 1, 3));
        let w = params.insert("w", random(&mut rng, 3, 3));
        let bias = params.insert("b", random(&mut rng, 1, 1));
        let build = |tape: &mut Tape, b: &crate::numerics::BoundParams| {
            let lhs = tape.matmul(b.var(e1), b.var(w)).unwrap();
            let rt = tape.transpose(b.var(e2)).unwrap();
            let logit = tape.matmul(lhs, rt).unwrap();
            let logit = tape.add(logit, b.var(bias)).unwrap();
            tape.sigmoid(logit).unwrap()
        };
        let (_, grads) = eval(&params, &build);
        let r = grad_check(&params, &grads, 1e-6, 1e-6, |p| eval(p, &build).0);
        assert!(r.max_rel_err < 1e-5, "{r:?}");
    }

    #[test]
    fn random_four_by_four_logdet_gradient_is_inverse_transpose() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut a = random(&mut rng, 4, 4);
        for i in 0..4 {
            let v = a.get(i, i);
            a.set(i, i, v + 2.0);
        }
        let mut params = ParamStore::new();
        let id = params.insert("a", a.clone());
        let build = |tape: &mut Tape, bp: &crate::numerics::BoundParams| tape.logdet(bp.var(id)).unwrap().0;
        let (_, grads) = eval(&params, &build);
        let (inv, _, _) = crate::numerics::inverse_and_logdet(&a).unwrap();
        assert!(grads[0].max_abs_diff(&inv.transpose()) < 1e-12);
        let r = grad_check(&params, &grads, 1e-6, 1e-6, |p| eval(p, &build).0);
        assert!(r.max_rel_err < 1e-5, "{r:?}");
    }
}
