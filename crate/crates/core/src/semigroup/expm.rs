//! Matrix exponential by scaling and squaring with the degree-13 Padé approximant.

use nalgebra::DMatrix;

const B13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371920351148152;

fn norm1(m: &DMatrix<f64>) -> f64 {
    m.column_iter().map(|c| c.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    assert!(a.is_square());
    let n = a.nrows();
    if n == 0 {
        return a.clone();
    }
    let nrm = norm1(a);
    if nrm == 0.0 {
        return DMatrix::identity(n, n);
    }
    let s = if nrm > THETA13 { (nrm / THETA13).log2().ceil() as i32 } else { 0 };
    let a = a / 2f64.powi(s);
    let ident = DMatrix::<f64>::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let b = &B13;
    let u_inner = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9]) + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &ident * b[1];
    let u = &a * u_inner;
    let v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8]) + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &ident * b[0];
    let mut r = (&v - &u).lu().solve(&(&v + &u)).expect("Padé denominator is nonsingular for scaled input");
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Classical fourth-order Runge–Kutta on x' = Ax with a fine step.
    fn rk4_column(a: &DMatrix<f64>, x0: nalgebra::DVector<f64>, t: f64, steps: usize) -> nalgebra::DVector<f64> {
        let h = t / steps as f64;
        let mut x = x0;
        for _ in 0..steps {
            let k1 = a * &x;
            let k2 = a * (&x + &k1 * (h / 2.0));
            let k3 = a * (&x + &k2 * (h / 2.0));
            let k4 = a * (&x + &k3 * h);
            x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        }
        x
    }

    #[test]
    fn scalar_and_zero() {
        let e = expm(&DMatrix::from_element(1, 1, -2.0));
        assert!((e[(0, 0)] - (-2f64).exp()).abs() < 1e-16);
        assert_eq!(expm(&DMatrix::zeros(3, 3)), DMatrix::identity(3, 3));
    }

    #[test]
    fn matches_ode_integration() {
        let a = DMatrix::from_row_slice(3, 3, &[-1.0, 2.0, 0.5, 0.3, -4.0, 1.0, 0.0, 0.7, -0.2]);
        for &t in &[0.1, 1.0, 3.0] {
            let e = expm(&(&a * t));
            for j in 0..3 {
                let mut x0 = nalgebra::DVector::zeros(3);
                x0[j] = 1.0;
                let col = rk4_column(&a, x0, t, 20000);
                assert!((e.column(j) - col).amax() < 1e-8);
            }
        }
    }

    #[test]
    fn large_norm_rotation_stays_orthogonal() {
        let w = 50.0;
        let a = DMatrix::from_row_slice(2, 2, &[0.0, -w, w, 0.0]);
        let e = expm(&a);
        assert!((e[(0, 0)] - w.cos()).abs() < 1e-12 && (e[(1, 0)] - w.sin()).abs() < 1e-12);
    }
}
