//! Brute-force LP oracle: enumerate every basic solution of a small, fully
//! boxed program and keep the cheapest feasible one.

#![allow(dead_code)]

use shapelab_lp::{LinearProgram, RowSense};

pub enum Oracle {
    Optimal(f64),
    Infeasible,
}

fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))?;
        if a[p][k].abs() < 1e-10 {
            return None;
        }
        a.swap(k, p);
        b.swap(k, p);
        for i in 0..n {
            if i != k {
                let f = a[i][k] / a[k][k];
                if f != 0.0 {
                    for c in k..n {
                        a[i][c] -= f * a[k][c];
                    }
                    b[i] -= f * b[k];
                }
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

fn combinations(pool: &[usize], k: usize, start: usize, cur: &mut Vec<usize>, out: &mut dyn FnMut(&[usize])) {
    if cur.len() == k {
        out(cur);
        return;
    }
    for idx in start..pool.len() {
        if pool.len() - idx < k - cur.len() {
            break;
        }
        cur.push(pool[idx]);
        combinations(pool, k, idx + 1, cur, out);
        cur.pop();
    }
}

/// Requires finite bounds on every variable.
pub fn vertex_enumeration(lp: &LinearProgram) -> Oracle {
    let n = lp.num_vars();
    // Hyperplanes: rows first, then lower bounds, then upper bounds.
    let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
    let mut mandatory = Vec::new();
    let mut optional = Vec::new();
    for row in &lp.rows {
        let mut a = vec![0.0; n];
        for &(j, v) in &row.coeffs {
            a[j] += v;
        }
        if row.sense == RowSense::Eq {
            mandatory.push(planes.len());
        } else {
            optional.push(planes.len());
        }
        planes.push((a, row.rhs));
    }
    for j in 0..n {
        let mut a = vec![0.0; n];
        a[j] = 1.0;
        optional.push(planes.len());
        planes.push((a.clone(), lp.lower[j]));
        optional.push(planes.len());
        planes.push((a, lp.upper[j]));
    }
    if mandatory.len() > n {
        // Over-determined equalities: pick n of them and check the rest.
        optional.extend(mandatory.drain(..));
    }
    let feasible = |x: &[f64]| {
        let tol = 1e-7;
        for j in 0..n {
            if x[j] < lp.lower[j] - tol || x[j] > lp.upper[j] + tol {
                return false;
            }
        }
        lp.rows.iter().all(|row| {
            let act: f64 = row.coeffs.iter().map(|&(j, v)| v * x[j]).sum();
            let scale = 1.0 + row.rhs.abs();
            match row.sense {
                RowSense::Eq => (act - row.rhs).abs() <= tol * scale,
                RowSense::Le => act <= row.rhs + tol * scale,
                RowSense::Ge => act >= row.rhs - tol * scale,
            }
        })
    };
    let mut best: Option<f64> = None;
    let need = n - mandatory.len();
    let mut cur = Vec::new();
    combinations(&optional, need, 0, &mut cur, &mut |pick| {
        let chosen: Vec<usize> = mandatory.iter().chain(pick.iter()).copied().collect();
        let a: Vec<Vec<f64>> = chosen.iter().map(|&p| planes[p].0.clone()).collect();
        let b: Vec<f64> = chosen.iter().map(|&p| planes[p].1).collect();
        if let Some(x) = solve_dense(a, b) {
            if feasible(&x) {
                let obj: f64 = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
                if best.is_none_or(|v| obj < v) {
                    best = Some(obj);
                }
            }
        }
    });
    match best {
        Some(v) => Oracle::Optimal(v),
        None => Oracle::Infeasible,
    }
}

/// Random boxed LP with up to `max_vars` variables and `max_rows` rows.
/// Integer-valued data keeps vertices well conditioned.
pub fn random_lp<R: rand::Rng>(rng: &mut R, max_vars: usize, max_rows: usize) -> LinearProgram {
    let n = rng.random_range(1..=max_vars);
    let m = rng.random_range(0..=max_rows);
    let mut lp = LinearProgram::new();
    for _ in 0..n {
        let lo = rng.random_range(-5..=2) as f64;
        let hi = lo + rng.random_range(0..=8) as f64;
        let c = rng.random_range(-9..=9) as f64;
        lp.add_var(c, lo, hi);
    }
    for _ in 0..m {
        let mut coeffs = Vec::new();
        for j in 0..n {
            if rng.random_bool(0.6) {
                let a = rng.random_range(-6..=6) as f64;
                if a != 0.0 {
                    coeffs.push((j, a));
                }
            }
        }
        let sense = match rng.random_range(0..5) {
            0 => RowSense::Eq,
            1 | 2 => RowSense::Le,
            _ => RowSense::Ge,
        };
        let rhs = rng.random_range(-12..=12) as f64;
        lp.add_row(coeffs, sense, rhs);
    }
    lp
}
