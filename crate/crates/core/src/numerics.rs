//! Scalar abstraction and small numeric kernels shared across the crate.
//!
//! All low-level math is generic over [`Scalar`] (any `num_traits` float,
//! f32 or f64); the simulation layer instantiates everything at the crate
//! root alias [`crate::Real`].

use num_traits::{Float, FromPrimitive};

/// Floating-point scalar the math kernels are generic over.
pub trait Scalar: Float + FromPrimitive + std::fmt::Debug + std::iter::Sum {}

impl<T> Scalar for T where T: Float + FromPrimitive + std::fmt::Debug + std::iter::Sum {}

/// Convert a literal without the `T::from(..).unwrap()` noise at call sites.
#[inline]
pub fn lit<T: Scalar>(x: f64) -> T {
    T::from_f64(x).expect("literal representable in scalar type")
}

/// Softmax of `values / temperature`, max-shifted so large utilities cannot
/// overflow the exponential. Invariant under adding a constant to all values.
pub fn softmax<T: Scalar>(values: &[T], temperature: T) -> Vec<T> {
    assert!(!values.is_empty(), "softmax over empty slice");
    assert!(temperature > T::zero(), "softmax temperature must be positive");
    let max = values.iter().cloned().fold(values[0], T::max);
    let exps: Vec<T> = values
        .iter()
        .map(|&v| ((v - max) / temperature).exp())
        .collect();
    let sum: T = exps.iter().cloned().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Pearson correlation coefficient. `None` when either series is constant
/// (zero variance) or the series are shorter than two samples.
pub fn pearson<T: Scalar>(xs: &[T], ys: &[T]) -> Option<T> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let n = lit::<T>(xs.len() as f64);
    let mean_x = xs.iter().cloned().sum::<T>() / n;
    let mean_y = ys.iter().cloned().sum::<T>() / n;
    let mut sxx = T::zero();
    let mut syy = T::zero();
    let mut sxy = T::zero();
    for (&x, &y) in xs.iter().zip(ys) {
        let dx = x - mean_x;
        let dy = y - mean_y;
        sxx = sxx + dx * dx;
        syy = syy + dy * dy;
        sxy = sxy + dx * dy;
    }
    if sxx == T::zero() || syy == T::zero() {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

/// Mean and sample standard deviation (n-1 denominator; std is 0 for n < 2).
pub fn mean_std<T: Scalar>(xs: &[T]) -> (T, T) {
    if xs.is_empty() {
        return (T::zero(), T::zero());
    }
    let n = lit::<T>(xs.len() as f64);
    let mean = xs.iter().cloned().sum::<T>() / n;
    if xs.len() < 2 {
        return (mean, T::zero());
    }
    let var = xs
        .iter()
        .map(|&x| (x - mean) * (x - mean))
        .sum::<T>()
        / (n - T::one());
    (mean, var.sqrt())
}

/// Eigenvalues of a symmetric matrix (row-major, n x n) by cyclic Jacobi
/// rotations, ascending. Deterministic and accurate for the small matrices
/// used here (network Laplacians).
pub fn symmetric_eigenvalues<T: Scalar>(matrix: &[T], n: usize) -> Vec<T> {
    assert_eq!(matrix.len(), n * n, "matrix must be n x n");
    let mut a = matrix.to_vec();
    let tol = lit::<T>(1e-14);
    let scale = a
        .iter()
        .map(|x| x.abs())
        .fold(T::zero(), T::max)
        .max(T::one());

    for _sweep in 0..100 {
        // Largest off-diagonal element.
        let mut p = 0;
        let mut q = 1;
        let mut max = T::zero();
        for i in 0..n {
            for j in (i + 1)..n {
                let v = a[i * n + j].abs();
                if v > max {
                    max = v;
                    p = i;
                    q = j;
                }
            }
        }
        if n < 2 || max <= tol * scale {
            break;
        }

        let app = a[p * n + p];
        let aqq = a[q * n + q];
        let apq = a[p * n + q];
        let tau = (aqq - app) / (lit::<T>(2.0) * apq);
        let t = if tau >= T::zero() {
            T::one() / (tau + (T::one() + tau * tau).sqrt())
        } else {
            -T::one() / (-tau + (T::one() + tau * tau).sqrt())
        };
        let c = T::one() / (T::one() + t * t).sqrt();
        let s = t * c;

        for i in 0..n {
            if i != p && i != q {
                let aip = a[i * n + p];
                let aiq = a[i * n + q];
                a[i * n + p] = c * aip - s * aiq;
                a[p * n + i] = a[i * n + p];
                a[i * n + q] = s * aip + c * aiq;
                a[q * n + i] = a[i * n + q];
            }
        }
        a[p * n + p] = c * c * app - lit::<T>(2.0) * s * c * apq + s * s * aqq;
        a[q * n + q] = s * s * app + lit::<T>(2.0) * s * c * apq + c * c * aqq;
        a[p * n + q] = T::zero();
        a[q * n + p] = T::zero();
    }

    let mut eig: Vec<T> = (0..n).map(|i| a[i * n + i]).collect();
    eig.sort_by(|x, y| x.partial_cmp(y).expect("finite eigenvalues"));
    eig
}

/// One replicator-dynamics update: `x_s <- x_s + step * x_s * (f_s - fbar)`,
/// clamped at zero and renormalized to the simplex.
///
/// The raw step is divided by `max(1, max_s |f_s - fbar|)` so arbitrarily
/// scaled fitness values cannot blow shares out of the simplex; fitness
/// spreads already below 1 are untouched.
pub fn replicator_step<T: Scalar>(shares: &mut [T], fitness: &[T], step: T) {
    assert_eq!(shares.len(), fitness.len());
    let fbar: T = shares
        .iter()
        .zip(fitness)
        .map(|(&x, &f)| x * f)
        .sum();
    let spread = fitness
        .iter()
        .map(|&f| (f - fbar).abs())
        .fold(T::zero(), T::max)
        .max(T::one());
    let eff = step / spread;
    for (x, &f) in shares.iter_mut().zip(fitness) {
        *x = (*x + eff * *x * (f - fbar)).max(T::zero());
    }
    let sum: T = shares.iter().cloned().sum();
    if sum > T::zero() {
        for x in shares.iter_mut() {
            *x = *x / sum;
        }
    } else {
        let uniform = T::one() / lit::<T>(shares.len() as f64);
        for x in shares.iter_mut() {
            *x = uniform;
        }
    }
}

/// Dense row-major matrix of simulation quantities (gains, SINRs, rates).
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Copy + Default> Grid<T> {
    pub fn new(rows: usize, cols: usize) -> Self {
        Grid {
            rows,
            cols,
            data: vec![T::default(); rows * cols],
        }
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: T) {
        self.data[r * self.cols + c] = v;
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_equal_utilities_is_uniform() {
        let p = softmax(&[2.0f64, 2.0, 2.0, 2.0], 1.0);
        for &x in &p {
            assert!((x - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_matches_hand_computation() {
        // utilities (0, ln 2), temperature 1 -> (1/3, 2/3)
        let p = softmax(&[0.0f64, std::f64::consts::LN_2], 1.0);
        assert!((p[0] - 1.0 / 3.0).abs() < 1e-12);
        assert!((p[1] - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn softmax_low_temperature_concentrates_on_argmax() {
        let p = softmax(&[0.0f64, 1.0, 0.5], 1e-6);
        assert!(p[1] > 1.0 - 1e-9);
    }

    #[test]
    fn softmax_shift_invariant() {
        let a = softmax(&[0.0f64, 1.0, -2.0], 0.7);
        let b = softmax(&[100.0f64, 101.0, 98.0], 0.7);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_works_at_f32() {
        let p = softmax(&[0.0f32, 1.0], 1.0f32);
        assert!((p[0] + p[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn pearson_perfect_line() {
        let xs = [1.0f64, 2.0, 3.0, 4.0];
        let ys = [2.0f64, 4.0, 6.0, 8.0];
        let r = pearson(&xs, &ys).unwrap();
        assert!((r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pearson_constant_series_is_none() {
        assert!(pearson(&[1.0f64, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_none());
    }

    #[test]
    fn jacobi_known_spectrum_path_p3() {
        // Laplacian of the 3-node path has spectrum {0, 1, 3}.
        let l = [1.0f64, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 1.0];
        let eig = symmetric_eigenvalues(&l, 3);
        assert!((eig[0] - 0.0).abs() < 1e-9);
        assert!((eig[1] - 1.0).abs() < 1e-9);
        assert!((eig[2] - 3.0).abs() < 1e-9);
    }

    #[test]
    fn replicator_two_strategy_example() {
        // fitness (1, 0), step 0.1 from (0.5, 0.5) -> (0.525, 0.475)
        let mut x = [0.5f64, 0.5];
        replicator_step(&mut x, &[1.0, 0.0], 0.1);
        assert!((x[0] - 0.525).abs() < 1e-12);
        assert!((x[1] - 0.475).abs() < 1e-12);
    }

    #[test]
    fn replicator_uniform_fitness_is_fixed_point() {
        let mut x = [0.3f64, 0.2, 0.5];
        let before = x;
        replicator_step(&mut x, &[4.0, 4.0, 4.0], 0.1);
        for (a, b) in x.iter().zip(&before) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn replicator_preserves_simplex_over_long_runs() {
        let mut x = vec![0.25f64; 4];
        let fitness = [3.0e6f64, 1.0e6, -2.0e6, 0.5e6];
        for _ in 0..1000 {
            replicator_step(&mut x, &fitness, 0.05);
            let sum: f64 = x.iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
            assert!(x.iter().all(|&v| v >= 0.0));
        }
    }
}
