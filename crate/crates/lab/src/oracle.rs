//! Numeric symplectic-eigenvalue oracle: builds the Gaussian covariance
//! matrices of the entangling-cloner picture explicitly and extracts their
//! symplectic spectra with a cyclic Jacobi eigensolver. Fully independent of
//! the closed-form eigenvalue expressions it is used to check.

use cvqkd_core::security::SecurityInput;

type Mat = Vec<Vec<f64>>;

fn zeros(n: usize) -> Mat {
    vec![vec![0.0; n]; n]
}

fn eye(n: usize) -> Mat {
    let mut m = zeros(n);
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    m
}

fn matmul(a: &Mat, b: &Mat) -> Mat {
    let n = a.len();
    let p = b[0].len();
    let mut c = vec![vec![0.0; p]; n];
    for i in 0..n {
        for (k, &aik) in a[i].iter().enumerate() {
            if aik == 0.0 {
                continue;
            }
            for j in 0..p {
                c[i][j] += aik * b[k][j];
            }
        }
    }
    c
}

fn transpose(a: &Mat) -> Mat {
    let n = a.len();
    let m = a[0].len();
    let mut t = vec![vec![0.0; n]; m];
    for i in 0..n {
        for j in 0..m {
            t[j][i] = a[i][j];
        }
    }
    t
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix; returns
/// (eigenvalues, eigenvector columns).
pub fn jacobi_eigen(a_in: &Mat) -> (Vec<f64>, Mat) {
    let n = a_in.len();
    let mut a = a_in.clone();
    let mut v = eye(n);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += a[i][j] * a[i][j];
            }
        }
        if off < 1e-28 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k][p];
                    let vkq = v[k][q];
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let eig = (0..n).map(|i| a[i][i]).collect();
    (eig, v)
}

/// Symmetric positive-semidefinite square root via the eigendecomposition.
fn sqrtm(a: &Mat) -> Mat {
    let (eig, v) = jacobi_eigen(a);
    let n = a.len();
    let mut d = zeros(n);
    for (i, &e) in eig.iter().enumerate() {
        d[i][i] = e.max(0.0).sqrt();
    }
    matmul(&matmul(&v, &d), &transpose(&v))
}

fn symplectic_form(modes: usize) -> Mat {
    let mut o = zeros(2 * modes);
    for m in 0..modes {
        o[2 * m][2 * m + 1] = 1.0;
        o[2 * m + 1][2 * m] = -1.0;
    }
    o
}

/// Symplectic eigenvalues of a covariance matrix: with `S = sqrt(Sigma)`,
/// the matrix `-S Omega S Omega S ... ` reduces to the symmetric
/// `G = (S Omega S)^T (S Omega S)` whose eigenvalues are the squared
/// symplectic spectrum, each twice.
pub fn symplectic_eigenvalues(sigma: &Mat) -> Vec<f64> {
    let modes = sigma.len() / 2;
    let s = sqrtm(sigma);
    let b = matmul(&matmul(&s, &symplectic_form(modes)), &s);
    let g = matmul(&transpose(&b), &b);
    let (mut eig, _) = jacobi_eigen(&g);
    eig.sort_by(|a, b| b.partial_cmp(a).unwrap());
    // eigenvalues come in identical pairs: take every other one
    (0..modes).map(|i| eig[2 * i].max(0.0).sqrt()).collect()
}

fn sigma_z_block(m: &mut Mat, i: usize, j: usize, c: f64) {
    m[2 * i][2 * j] = c;
    m[2 * i + 1][2 * j + 1] = -c;
    m[2 * j][2 * i] = c;
    m[2 * j + 1][2 * i + 1] = -c;
}

fn identity_block(m: &mut Mat, i: usize, c: f64) {
    m[2 * i][2 * i] = c;
    m[2 * i + 1][2 * i + 1] = c;
}

/// Numeric symplectic spectra for the trusted-receiver heterodyne model:
/// the shared Alice-channel state (two eigenvalues) and the three-mode
/// conditional state after Bob's heterodyne measurement.
pub fn oracle_spectra(inp: &SecurityInput) -> (Vec<f64>, Vec<f64>) {
    let v = inp.v_a + 1.0;
    let t = inp.t;
    let chi_line = (1.0 + t * inp.xi) / t - 1.0;

    // modes: A (Alice), B1 (after channel)
    let mut s_ab = zeros(4);
    identity_block(&mut s_ab, 0, v);
    identity_block(&mut s_ab, 1, t * (v + chi_line));
    sigma_z_block(&mut s_ab, 0, 1, (t * (v * v - 1.0)).sqrt());
    let lam12 = symplectic_eigenvalues(&s_ab);

    // detector model: beamsplitter eta mixing B1 with one half of an EPR
    // pair (F0, G) of variance v_d carrying the electrical noise
    let v_d = 1.0 + 2.0 * inp.nu_el / (1.0 - inp.eta);
    let mut s4 = zeros(8); // modes A, B1, F0, G
    for i in 0..4 {
        for j in 0..4 {
            s4[i][j] = s_ab[i][j];
        }
    }
    identity_block(&mut s4, 2, v_d);
    identity_block(&mut s4, 3, v_d);
    sigma_z_block(&mut s4, 2, 3, (v_d * v_d - 1.0).sqrt());

    let mut bs = eye(8);
    let (ce, se) = (inp.eta.sqrt(), (1.0 - inp.eta).sqrt());
    for k in 0..2 {
        bs[2 + k][2 + k] = ce;
        bs[2 + k][4 + k] = se;
        bs[4 + k][2 + k] = -se;
        bs[4 + k][4 + k] = ce;
    }
    let s_mix = matmul(&matmul(&bs, &s4), &transpose(&bs)); // A, B2, F1, G

    // condition modes (A, F1, G) on a heterodyne measurement of B2
    let keep = [0usize, 1, 4, 5, 6, 7];
    let bidx = [2usize, 3];
    let mut s_b = zeros(2);
    for (i, &bi) in bidx.iter().enumerate() {
        for (j, &bj) in bidx.iter().enumerate() {
            s_b[i][j] = s_mix[bi][bj];
        }
        s_b[i][i] += 1.0; // heterodyne adds one vacuum unit
    }
    let det = s_b[0][0] * s_b[1][1] - s_b[0][1] * s_b[1][0];
    let inv = vec![
        vec![s_b[1][1] / det, -s_b[0][1] / det],
        vec![-s_b[1][0] / det, s_b[0][0] / det],
    ];
    let mut c = vec![vec![0.0; 2]; 6];
    for (i, &ki) in keep.iter().enumerate() {
        for (j, &bj) in bidx.iter().enumerate() {
            c[i][j] = s_mix[ki][bj];
        }
    }
    let correction = matmul(&matmul(&c, &inv), &transpose(&c));
    let mut s_cond = zeros(6);
    for (i, &ki) in keep.iter().enumerate() {
        for (j, &kj) in keep.iter().enumerate() {
            s_cond[i][j] = s_mix[ki][kj] - correction[i][j];
        }
    }
    let lam345 = symplectic_eigenvalues(&s_cond);
    (lam12, lam345)
}
