//! Exact integer linear algebra for 3x3 matrices: determinants, adjugates,
//! characteristic polynomials and Smith normal form.

pub type IMat = [[i128; 3]; 3];

pub fn identity() -> IMat {
    [[1, 0, 0], [0, 1, 0], [0, 0, 1]]
}

pub fn mat_mul(a: &IMat, b: &IMat) -> IMat {
    let mut c = [[0i128; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            for (k, bk) in b.iter().enumerate() {
                c[i][j] += a[i][k] * bk[j];
            }
        }
    }
    c
}

pub fn mat_pow(a: &IMat, n: u32) -> IMat {
    let mut out = identity();
    for _ in 0..n {
        out = mat_mul(&out, a);
    }
    out
}

pub fn det(a: &IMat) -> i128 {
    a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
        - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
}

/// Adjugate, so that a * adj(a) = det(a) * I.
pub fn adjugate(a: &IMat) -> IMat {
    let mut c = [[0i128; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let rows: Vec<usize> = (0..3).filter(|&k| k != j).collect();
            let cols: Vec<usize> = (0..3).filter(|&k| k != i).collect();
            let minor = a[rows[0]][cols[0]] * a[rows[1]][cols[1]]
                - a[rows[0]][cols[1]] * a[rows[1]][cols[0]];
            let sign = if (i + j) % 2 == 0 { 1 } else { -1 };
            c[i][j] = sign * minor;
        }
    }
    c
}

/// Coefficients (c2, c1, c0) of det(tI - A) = t^3 - c2 t^2 + c1 t - c0.
pub fn char_poly(a: &IMat) -> (i128, i128, i128) {
    let c2 = a[0][0] + a[1][1] + a[2][2];
    let c1 = (a[0][0] * a[1][1] - a[0][1] * a[1][0])
        + (a[0][0] * a[2][2] - a[0][2] * a[2][0])
        + (a[1][1] * a[2][2] - a[1][2] * a[2][1]);
    let c0 = det(a);
    (c2, c1, c0)
}

/// Discriminant of t^3 + p t^2 + q t + r.
pub fn cubic_discriminant(p: i128, q: i128, r: i128) -> i128 {
    18 * p * q * r - 4 * p * p * p * r + p * p * q * q - 4 * q * q * q - 27 * r * r
}

/// Diagonalization over Z by unimodular row/column operations: returns (d, t)
/// with nonnegative diagonal d and unimodular t such that the solutions of
/// M x = 0 mod Z^3 on the torus are exactly
/// x = t * (j0/d0, j1/d1, j2/d2) mod Z^3, 0 <= ji < di.
pub fn smith_normal_form(m: &IMat) -> ([i128; 3], IMat) {
    let mut a = *m;
    let mut t = identity();

    fn swap_rows(a: &mut IMat, i: usize, j: usize) {
        a.swap(i, j);
    }
    fn swap_cols(a: &mut IMat, t: &mut IMat, i: usize, j: usize) {
        for r in a.iter_mut() {
            r.swap(i, j);
        }
        for r in t.iter_mut() {
            r.swap(i, j);
        }
    }
    fn add_row(a: &mut IMat, dst: usize, src: usize, f: i128) {
        for j in 0..3 {
            a[dst][j] += f * a[src][j];
        }
    }
    fn add_col(a: &mut IMat, t: &mut IMat, dst: usize, src: usize, f: i128) {
        for i in 0..3 {
            a[i][dst] += f * a[i][src];
            t[i][dst] += f * t[i][src];
        }
    }

    for k in 0..3 {
        loop {
            // move a nonzero pivot of minimal absolute value to (k, k)
            let mut best: Option<(usize, usize)> = None;
            for i in k..3 {
                for j in k..3 {
                    if a[i][j] != 0
                        && best.is_none_or(|(bi, bj)| a[i][j].abs() < a[bi][bj].abs())
                    {
                        best = Some((i, j));
                    }
                }
            }
            let Some((bi, bj)) = best else { break };
            if bi != k {
                swap_rows(&mut a, bi, k);
            }
            if bj != k {
                swap_cols(&mut a, &mut t, bj, k);
            }
            let mut dirty = false;
            for i in (k + 1)..3 {
                let f = a[i][k].div_euclid(a[k][k]);
                if f != 0 {
                    add_row(&mut a, i, k, -f);
                }
                if a[i][k] != 0 {
                    dirty = true;
                }
            }
            for j in (k + 1)..3 {
                let f = a[k][j].div_euclid(a[k][k]);
                if f != 0 {
                    add_col(&mut a, &mut t, j, k, -f);
                }
                if a[k][j] != 0 {
                    dirty = true;
                }
            }
            if !dirty {
                break;
            }
        }
    }
    let d = [a[0][0].abs(), a[1][1].abs(), a[2][2].abs()];
    (d, t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snf_diagonal_product_is_det() {
        let m: IMat = [[-1, 0, 1], [1, -1, -6], [0, 1, 4]];
        let (d, t) = smith_normal_form(&m);
        assert_eq!(d[0] * d[1] * d[2], det(&m).abs());
        assert_eq!(det(&t).abs(), 1);
    }

    #[test]
    fn char_poly_of_companion() {
        let a: IMat = [[0, 0, 1], [1, 0, -6], [0, 1, 5]];
        assert_eq!(char_poly(&a), (5, 6, 1));
        assert_eq!(det(&a), 1);
    }

    #[test]
    fn adjugate_identity() {
        let a: IMat = [[0, 0, 1], [1, 0, -6], [0, 1, 5]];
        let adj = adjugate(&a);
        let prod = mat_mul(&a, &adj);
        let d = det(&a);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(prod[i][j], if i == j { d } else { 0 });
            }
        }
    }
}
