//! Stateless forward/backward kernels for the three fixed architectures.

use super::matrix::{gemm, DenseMatrix};
use super::NnError;

/// `y = x W + b`, with `x: B×in`, `W: in×out`, `b: 1×out`.
pub fn affine_forward(x: &DenseMatrix, w: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix, NnError> {
    if b.rows() != 1 || b.cols() != w.cols() {
        return Err(NnError::DimensionMismatch(format!(
            "bias {}x{} for weight {}x{}",
            b.rows(),
            b.cols(),
            w.rows(),
            w.cols()
        )));
    }
    let mut y = DenseMatrix::zeros(x.rows(), w.cols());
    for r in 0..y.rows() {
        y.row_mut(r).copy_from_slice(b.as_slice());
    }
    gemm(1.0, x, false, w, false, 1.0, &mut y)?;
    Ok(y)
}

/// Gradients of [`affine_forward`]: returns `(dx, dW, db)`.
pub fn affine_backward(
    x: &DenseMatrix,
    w: &DenseMatrix,
    grad_out: &DenseMatrix,
) -> Result<(DenseMatrix, DenseMatrix, DenseMatrix), NnError> {
    if grad_out.rows() != x.rows() || grad_out.cols() != w.cols() {
        return Err(NnError::DimensionMismatch(format!(
            "grad {}x{} for output {}x{}",
            grad_out.rows(),
            grad_out.cols(),
            x.rows(),
            w.cols()
        )));
    }
    let mut dx = DenseMatrix::zeros(x.rows(), x.cols());
    gemm(1.0, grad_out, false, w, true, 0.0, &mut dx)?;
    let mut dw = DenseMatrix::zeros(w.rows(), w.cols());
    gemm(1.0, x, true, grad_out, false, 0.0, &mut dw)?;
    Ok((dx, dw, grad_out.column_sums()))
}

/// Accumulating variant used by the models: `dW += xᵀ g`, `db += Σ g`.
pub(crate) fn accumulate_affine_grads(
    x: &DenseMatrix,
    grad_out: &DenseMatrix,
    dw: &mut DenseMatrix,
    db: &mut DenseMatrix,
) -> Result<(), NnError> {
    gemm(1.0, x, true, grad_out, false, 1.0, dw)?;
    for r in 0..grad_out.rows() {
        for (acc, g) in db.as_mut_slice().iter_mut().zip(grad_out.row(r)) {
            *acc += g;
        }
    }
    Ok(())
}

pub fn tanh_forward(x: &DenseMatrix) -> DenseMatrix {
    let mut y = x.clone();
    super::tanh::tanh_in_place(y.as_mut_slice());
    y
}

/// `grad_in = grad_out ⊙ (1 − y²)` where `y` is the forward output.
pub fn tanh_backward(y: &DenseMatrix, grad_out: &DenseMatrix) -> Result<DenseMatrix, NnError> {
    if y.shape() != grad_out.shape() {
        return Err(NnError::DimensionMismatch("tanh backward shapes differ".into()));
    }
    let mut g = grad_out.clone();
    for (gi, yi) in g.as_mut_slice().iter_mut().zip(y.as_slice()) {
        *gi *= 1.0 - yi * yi;
    }
    Ok(g)
}

/// Mean squared error over every element and its gradient `2(pred − target)/count`.
pub fn mse_loss(pred: &DenseMatrix, target: &DenseMatrix) -> Result<(f64, DenseMatrix), NnError> {
    if pred.shape() != target.shape() {
        return Err(NnError::DimensionMismatch(format!(
            "prediction {:?} vs target {:?}",
            pred.shape(),
            target.shape()
        )));
    }
    let count = pred.len().max(1) as f64;
    let mut grad = DenseMatrix::zeros(pred.rows(), pred.cols());
    let mut loss = 0.0;
    for ((g, p), t) in grad
        .as_mut_slice()
        .iter_mut()
        .zip(pred.as_slice())
        .zip(target.as_slice())
    {
        let d = p - t;
        loss += d * d;
        *g = 2.0 * d / count;
    }
    Ok((loss / count, grad))
}

/// MSE without the gradient buffer.
pub fn mse(pred: &DenseMatrix, target: &DenseMatrix) -> Result<f64, NnError> {
    if pred.shape() != target.shape() {
        return Err(NnError::DimensionMismatch("mse shapes differ".into()));
    }
    let sum: f64 = pred
        .as_slice()
        .iter()
        .zip(target.as_slice())
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok(sum / pred.len().max(1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
        DenseMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    /// Central difference of `f` with respect to every entry of `m`.
    fn numeric_grad(m: &DenseMatrix, h: f64, mut f: impl FnMut(&DenseMatrix) -> f64) -> DenseMatrix {
        let mut g = DenseMatrix::zeros(m.rows(), m.cols());
        let mut probe = m.clone();
        for k in 0..m.len() {
            let orig = probe.as_slice()[k];
            probe.as_mut_slice()[k] = orig + h;
            let up = f(&probe);
            probe.as_mut_slice()[k] = orig - h;
            let down = f(&probe);
            probe.as_mut_slice()[k] = orig;
            g.as_mut_slice()[k] = (up - down) / (2.0 * h);
        }
        g
    }

    fn rel_err(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
        let scale = a
            .as_slice()
            .iter()
            .chain(b.as_slice())
            .fold(1e-8f64, |m, v| m.max(v.abs()));
        a.max_abs_diff(b) / scale
    }

    /// Weighted sum so every output element gets a distinct upstream gradient.
    fn weights(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
        random(rows, cols, rng)
    }

    fn dot(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
        a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn identity_affine_is_identity() {
        let x = DenseMatrix::from_rows(&[&[1.0, -2.0, 3.0]]).unwrap();
        let y = affine_forward(&x, &DenseMatrix::identity(3), &DenseMatrix::zeros(1, 3)).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn affine_backward_ones() {
        let x = DenseMatrix::from_rows(&[&[1.0, 1.0]]).unwrap();
        let w = DenseMatrix::from_rows(&[&[0.3, -0.2], &[0.5, 0.1]]).unwrap();
        let g = DenseMatrix::from_rows(&[&[1.0, 1.0]]).unwrap();
        let (dx, dw, db) = affine_backward(&x, &w, &g).unwrap();
        assert_eq!(dw.as_slice(), &[1.0, 1.0, 1.0, 1.0]);
        assert_eq!(db.as_slice(), &[1.0, 1.0]);
        assert!((dx.get(0, 0) - 0.1).abs() < 1e-15 && (dx.get(0, 1) - 0.6).abs() < 1e-15);
    }

    #[test]
    fn affine_dimension_errors() {
        let x = DenseMatrix::zeros(2, 3);
        assert!(affine_forward(&x, &DenseMatrix::zeros(2, 2), &DenseMatrix::zeros(1, 2)).is_err());
        assert!(affine_forward(&x, &DenseMatrix::zeros(3, 2), &DenseMatrix::zeros(1, 3)).is_err());
        assert!(affine_backward(&x, &DenseMatrix::zeros(3, 2), &DenseMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn affine_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (x, w, b) = (random(3, 4, &mut rng), random(4, 5, &mut rng), random(1, 5, &mut rng));
        let c = weights(3, 5, &mut rng);
        let (dx, dw, db) = affine_backward(&x, &w, &c).unwrap();
        let h = 1e-5;
        let nx = numeric_grad(&x, h, |p| dot(&affine_forward(p, &w, &b).unwrap(), &c));
        let nw = numeric_grad(&w, h, |p| dot(&affine_forward(&x, p, &b).unwrap(), &c));
        let nb = numeric_grad(&b, h, |p| dot(&affine_forward(&x, &w, p).unwrap(), &c));
        assert!(rel_err(&dx, &nx) < 1e-6);
        assert!(rel_err(&dw, &nw) < 1e-6);
        assert!(rel_err(&db, &nb) < 1e-6);
    }

    #[test]
    fn tanh_basics_and_gradient() {
        let z = DenseMatrix::zeros(1, 1);
        assert_eq!(tanh_forward(&z).get(0, 0), 0.0);
        let g = DenseMatrix::from_rows(&[&[0.7]]).unwrap();
        assert_eq!(tanh_backward(&tanh_forward(&z), &g).unwrap().get(0, 0), 0.7);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random(4, 3, &mut rng);
        let c = weights(4, 3, &mut rng);
        let analytic = tanh_backward(&tanh_forward(&x), &c).unwrap();
        let numeric = numeric_grad(&x, 1e-5, |p| dot(&tanh_forward(p), &c));
        assert!(rel_err(&analytic, &numeric) < 1e-8);
    }

    #[test]
    fn mse_values_and_gradient() {
        let t = DenseMatrix::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]).unwrap();
        assert_eq!(mse_loss(&t, &t).unwrap().0, 0.0);
        let p = t.map(|v| v + 1.0);
        assert_eq!(mse_loss(&p, &t).unwrap().0, 1.0);
        assert!(mse_loss(&p, &DenseMatrix::zeros(1, 2)).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (pred, target) = (random(3, 5, &mut rng), random(3, 5, &mut rng));
        let (_, grad) = mse_loss(&pred, &target).unwrap();
        let numeric = numeric_grad(&pred, 1e-5, |p| mse_loss(p, &target).unwrap().0);
        assert!(rel_err(&grad, &numeric) < 1e-8);
        assert!((mse(&pred, &target).unwrap() - mse_loss(&pred, &target).unwrap().0).abs() < 1e-15);
    }

    #[test]
    fn randomized_backward_checks() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..100 {
            let (n, i, o) = (rng.random_range(1..6), rng.random_range(1..6), rng.random_range(1..6));
            let (x, w, b) = (random(n, i, &mut rng), random(i, o, &mut rng), random(1, o, &mut rng));
            let target = random(n, o, &mut rng);
            // loss(x, W, b) = mse(tanh(xW + b), target)
            let loss = |x: &DenseMatrix, w: &DenseMatrix, b: &DenseMatrix| {
                mse(&tanh_forward(&affine_forward(x, w, b).unwrap()), &target).unwrap()
            };
            let y = tanh_forward(&affine_forward(&x, &w, &b).unwrap());
            let (_, gy) = mse_loss(&y, &target).unwrap();
            let gz = tanh_backward(&y, &gy).unwrap();
            let (dx, dw, db) = affine_backward(&x, &w, &gz).unwrap();
            let h = 1e-5;
            assert!(rel_err(&dx, &numeric_grad(&x, h, |p| loss(p, &w, &b))) < 1e-5);
            assert!(rel_err(&dw, &numeric_grad(&w, h, |p| loss(&x, p, &b))) < 1e-5);
            assert!(rel_err(&db, &numeric_grad(&b, h, |p| loss(&x, &w, p))) < 1e-5);
        }
    }
}
