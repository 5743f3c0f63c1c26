use proptest::prelude::*;
use switchreg::grid::{GridSpec, ScalarField};
use switchreg::obstacle::{
    complementarity_residual, solve_double_obstacle, solve_double_obstacle_from, solve_poisson,
    EllipticConfig, InitialGuess,
};

/// Dense Gaussian elimination with partial pivoting.
fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

/// Enumerates all 3^9 active sets of the double-obstacle LCP on a 5×5 grid
/// and returns the interior values of the one satisfying every condition.
fn brute_force(forcing: &[f64], lower: &[f64], upper: &[f64], g: &ScalarField) -> Vec<f64> {
    let grid = *g.grid();
    let h2 = grid.hx() * grid.hx();
    let interior: Vec<usize> = (1..4).flat_map(|j| (1..4).map(move |i| j * 5 + i)).collect();
    let pos = |k: usize| interior.iter().position(|&q| q == k);
    let mut found = Vec::new();
    for code in 0..3usize.pow(9) {
        // 0 = free, 1 = at lower, 2 = at upper
        let state: Vec<usize> = (0..9).map(|p| (code / 3usize.pow(p as u32)) % 3).collect();
        let mut u = g.values().to_vec();
        for (p, &k) in interior.iter().enumerate() {
            match state[p] {
                1 => u[k] = lower[k],
                2 => u[k] = upper[k],
                _ => {}
            }
        }
        let free: Vec<usize> = (0..9).filter(|&p| state[p] == 0).collect();
        if !free.is_empty() {
            let m = free.len();
            let mut a = vec![vec![0.0; m]; m];
            let mut b = vec![0.0; m];
            for (r, &p) in free.iter().enumerate() {
                let k = interior[p];
                a[r][r] = 4.0 / h2;
                b[r] = forcing[k];
                for q in [k - 1, k + 1, k - 5, k + 5] {
                    match pos(q).filter(|&pq| state[pq] == 0) {
                        Some(pq) => a[r][free.iter().position(|&f| f == pq).unwrap()] = -1.0 / h2,
                        None => b[r] += u[q] / h2,
                    }
                }
            }
            let x = dense_solve(a, b);
            for (r, &p) in free.iter().enumerate() {
                u[interior[p]] = x[r];
            }
        }
        let ok = interior.iter().enumerate().all(|(p, &k)| {
            let r = (4.0 * u[k] - u[k - 1] - u[k + 1] - u[k - 5] - u[k + 5]) / h2 - forcing[k];
            let t = 1e-9;
            match state[p] {
                0 => u[k] >= lower[k] - t && u[k] <= upper[k] + t,
                1 => r >= -t,
                _ => r <= t,
            }
        });
        if ok {
            found.push(interior.iter().map(|&k| u[k]).collect::<Vec<_>>());
        }
    }
    assert!(!found.is_empty(), "no complementary active set");
    found.swap_remove(0)
}

fn field(grid: GridSpec, v: Vec<f64>) -> ScalarField {
    ScalarField::new(grid, v).unwrap()
}

fn tight() -> EllipticConfig {
    EllipticConfig {
        ctol: 1e-10,
        ..EllipticConfig::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn matches_brute_force_lcp(
        f in proptest::collection::vec(-20.0f64..20.0, 25),
        lo in proptest::collection::vec(0.0f64..0.5, 25),
        hi in proptest::collection::vec(0.0f64..0.5, 25),
    ) {
        let grid = GridSpec::square(1.0, 5).unwrap();
        let lower: Vec<f64> = lo.iter().map(|v| -v).collect();
        let g = field(grid, vec![0.0; 25]);
        let u = solve_double_obstacle(
            &field(grid, f.clone()),
            &field(grid, lower.clone()),
            &field(grid, hi.clone()),
            &g,
            &tight(),
        ).unwrap();
        let exact = brute_force(&f, &lower, &hi, &g);
        let interior: Vec<usize> = (1..4).flat_map(|j| (1..4).map(move |i| j * 5 + i)).collect();
        for (p, &k) in interior.iter().enumerate() {
            prop_assert!((u.field.values()[k] - exact[p]).abs() < 1e-8,
                "node {k}: {} vs {}", u.field.values()[k], exact[p]);
        }
    }

    #[test]
    fn larger_forcing_never_lowers_solution(
        f in proptest::collection::vec(-20.0f64..20.0, 25),
        df in proptest::collection::vec(0.0f64..10.0, 25),
        lo in proptest::collection::vec(0.0f64..0.5, 25),
        hi in proptest::collection::vec(0.0f64..0.5, 25),
    ) {
        let grid = GridSpec::square(1.0, 5).unwrap();
        let lower = field(grid, lo.iter().map(|v| -v).collect());
        let upper = field(grid, hi);
        let g = ScalarField::zeros(grid);
        let f2: Vec<f64> = f.iter().zip(&df).map(|(a, b)| a + b).collect();
        let a = solve_double_obstacle(&field(grid, f), &lower, &upper, &g, &tight()).unwrap();
        let b = solve_double_obstacle(&field(grid, f2), &lower, &upper, &g, &tight()).unwrap();
        for (x, y) in a.field.values().iter().zip(b.field.values()) {
            prop_assert!(*y >= x - 1e-9);
        }
    }
}

fn wavy_problem(n: usize) -> (ScalarField, ScalarField, ScalarField, ScalarField) {
    let grid = GridSpec::square(1.0, n).unwrap();
    let forcing = ScalarField::from_fn(grid, |x, y| 30.0 * (3.0 * x).sin() * (2.0 * y).cos());
    let lower = ScalarField::from_fn(grid, |x, y| -0.2 - 0.1 * x * y);
    let upper = ScalarField::from_fn(grid, |x, y| 0.15 + 0.05 * (x + y));
    let g = ScalarField::from_fn(grid, |x, _| 0.05 * x);
    (forcing, lower, upper, g)
}

#[test]
fn independent_of_initial_guess() {
    let (f, lo, hi, g) = wavy_problem(65);
    let cfg = EllipticConfig::default();
    let a = solve_double_obstacle_from(&f, &lo, &hi, &g, &cfg, InitialGuess::Lower).unwrap();
    let b = solve_double_obstacle_from(&f, &lo, &hi, &g, &cfg, InitialGuess::Upper).unwrap();
    let c = solve_double_obstacle_from(&f, &lo, &hi, &g, &cfg, InitialGuess::Interpolated).unwrap();
    let tolc = cfg.ctol * switchreg::obstacle::obstacle_scale(&f, &lo, &hi, &g);
    assert!(a.field.sub(&b.field).unwrap().max_abs() <= 10.0 * tolc);
    assert!(a.field.sub(&c.field).unwrap().max_abs() <= 10.0 * tolc);
    assert!(complementarity_residual(&a.field, &f, &lo, &hi) <= tolc);
    // both obstacles are touched somewhere
    let v = a.field.values();
    assert!(v.iter().zip(lo.values()).any(|(u, l)| u == l));
    assert!(v.iter().zip(hi.values()).any(|(u, h)| u == h));
    assert!(v.iter().zip(lo.values().iter().zip(hi.values())).all(|(u, (l, h))| l <= u && u <= h));
}

#[test]
fn inactive_obstacles_reduce_to_poisson() {
    let grid = GridSpec::square(1.0, 65).unwrap();
    let f = ScalarField::from_fn(grid, |x, y| (x + 2.0 * y).cos());
    let g = ScalarField::from_fn(grid, |x, y| 0.1 * x * y);
    let lo = ScalarField::constant(grid, -10.0);
    let hi = ScalarField::constant(grid, 10.0);
    let cfg = EllipticConfig::default();
    let u = solve_double_obstacle(&f, &lo, &hi, &g, &cfg).unwrap();
    let p = solve_poisson(&f, &g, &cfg).unwrap();
    // both stop at their own residual thresholds; their difference is bounded
    // by the inverse Laplacian (norm <= 1/2 on the unit square) applied to
    // the residuals
    let tolc = cfg.ctol * switchreg::obstacle::obstacle_scale(&f, &lo, &hi, &g);
    assert!(u.field.sub(&p.field).unwrap().max_abs() <= 10.0 * tolc);
}
