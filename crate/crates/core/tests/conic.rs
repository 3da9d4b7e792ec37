//! Solver and projection checks against independent oracles.

use approx::assert_abs_diff_eq;
use nalgebra::{DMatrix, SymmetricEigen};
use panm::conic::{
    hermitian_embed, problem_from_text, problem_to_text, project_nonneg, project_psd, project_soc,
    smat, solve, svec, Cone, ConeSpec, ConicProblem, CscMatrix, Settings, Status,
};
use panm::C64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn sym_from(n: usize, vals: &[f64]) -> DMatrix<f64> {
    let m = DMatrix::from_fn(n, n, |i, j| vals[i * n + j]);
    (&m + m.transpose()) * 0.5
}

/// Nearest PSD matrix via nalgebra's symmetric eigensolver.
fn psd_oracle(m: &DMatrix<f64>) -> DMatrix<f64> {
    let e = SymmetricEigen::new(m.clone());
    let d = DMatrix::from_diagonal(&e.eigenvalues.map(|l| l.max(0.0)));
    &e.eigenvectors * d * e.eigenvectors.transpose()
}

fn sorted_eigs(m: &DMatrix<f64>) -> Vec<f64> {
    let mut e: Vec<f64> = SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .copied()
        .collect();
    e.sort_by(f64::total_cmp);
    e
}

#[test]
fn nonneg_examples() {
    assert_eq!(project_nonneg(&[1.0, -2.0, 0.0]), vec![1.0, 0.0, 0.0]);
    let v = [0.5, 3.0, 0.0];
    assert_eq!(project_nonneg(&v), v.to_vec());
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let v: Vec<f64> = (0..50).map(|_| rng.random_range(-5.0..5.0)).collect();
    let p = project_nonneg(&v);
    for (a, b) in v.iter().zip(&p) {
        assert_eq!(*b, if *a > 0.0 { *a } else { 0.0 });
    }
}

#[test]
fn soc_examples() {
    assert_eq!(project_soc(&[2.0, 1.0, 1.0]), vec![2.0, 1.0, 1.0]);
    assert_eq!(project_soc(&[-3.0, 1.0, 0.0]), vec![0.0, 0.0, 0.0]);
    let p = project_soc(&[0.0, 2.0, 0.0]);
    assert_abs_diff_eq!(diff(&p, &[1.0, 1.0, 0.0]), 0.0, epsilon = 1e-12);
}

#[test]
fn soc_projection_matches_grid_search() {
    // Nearest point of the 3-d cone to (0; 2, 0), by brute force over
    // (t, angle) on the boundary and a radial sweep inside.
    let v = [0.0, 2.0, 0.0];
    let mut best = (f64::INFINITY, [0.0; 3]);
    let n = 2000;
    for i in 0..=n {
        let t = 3.0 * i as f64 / n as f64;
        for k in 0..64 {
            let th = std::f64::consts::TAU * k as f64 / 64.0;
            let u = [t, t * th.cos(), t * th.sin()];
            let d = diff(&u, &v);
            if d < best.0 {
                best = (d, u);
            }
        }
    }
    let p = project_soc(&v);
    assert!(diff(&p, &v) <= best.0 + 1e-12);
    assert!(diff(&p, &best.1) < 2e-3);
}

#[test]
fn soc_projection_matches_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..1000 {
        let d = rng.random_range(1..8);
        let v: Vec<f64> = (0..d).map(|_| rng.random_range(-3.0..3.0)).collect();
        let (t, x) = (v[0], &v[1..]);
        let nx = norm(x);
        let want: Vec<f64> = if nx <= t {
            v.clone()
        } else if nx <= -t {
            vec![0.0; d]
        } else {
            let a = (t + nx) / 2.0;
            std::iter::once(a)
                .chain(x.iter().map(|xi| a * xi / nx))
                .collect()
        };
        assert!(diff(&project_soc(&v), &want) <= 1e-10);
    }
}

#[test]
fn psd_examples() {
    let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
    let p = project_psd(&m).unwrap();
    assert_abs_diff_eq!(
        (p - DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0])).norm(),
        0.0,
        epsilon = 1e-14
    );
    let b = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 0.5, 1.0, 0.3, 0.0, -0.2, 1.0]);
    let spd = &b * b.transpose();
    assert!((project_psd(&spd).unwrap() - &spd).norm() <= 1e-12);
}

#[test]
fn psd_projection_matches_eigen_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for n in [1, 2, 4, 7, 12] {
        for _ in 0..40 {
            let vals: Vec<f64> = (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let m = sym_from(n, &vals);
            let got = project_psd(&m).unwrap();
            assert!((&got - psd_oracle(&m)).norm() <= 1e-10, "n={n}");
        }
    }
}

#[test]
fn svec_matches_frobenius_inner_product() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let n = 5;
    let a = sym_from(n, &(0..n * n).map(|_| rng.random()).collect::<Vec<f64>>());
    let b = sym_from(n, &(0..n * n).map(|_| rng.random()).collect::<Vec<f64>>());
    let (va, vb) = (svec(&a), svec(&b));
    assert_eq!(va.len(), n * (n + 1) / 2);
    let ip: f64 = va.iter().zip(&vb).map(|(x, y)| x * y).sum();
    assert_abs_diff_eq!(ip, a.dot(&b), epsilon = 1e-12);
    assert!((smat(&va, n) - a).norm() < 1e-14);
}

#[test]
fn embed_identity_and_antisymmetric_example() {
    let i2 = DMatrix::<C64>::identity(2, 2);
    assert_eq!(
        hermitian_embed(&i2).unwrap(),
        DMatrix::<f64>::identity(4, 4)
    );

    let j = C64::new(0.0, 1.0);
    let h = DMatrix::from_row_slice(2, 2, &[C64::new(0.0, 0.0), j, -j, C64::new(0.0, 0.0)]);
    let e = sorted_eigs(&hermitian_embed(&h).unwrap());
    for (got, want) in e.iter().zip([-1.0, -1.0, 1.0, 1.0]) {
        assert_abs_diff_eq!(*got, want, epsilon = 1e-12);
    }
}

#[test]
fn embed_doubles_spectrum_and_keeps_psd() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for n in [1, 3, 6] {
        let b = DMatrix::from_fn(n, n, |_, _| {
            C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let h = &b * b.adjoint();
        let e = hermitian_embed(&h).unwrap();
        assert!((project_psd(&e).unwrap() - &e).norm() <= 1e-10);

        // Eigenvalues of H from the complex eigen oracle, each twice.
        let mut want: Vec<f64> = h
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .flat_map(|l| [*l, *l])
            .collect();
        want.sort_by(f64::total_cmp);
        for (g, w) in sorted_eigs(&e).iter().zip(&want) {
            assert_abs_diff_eq!(*g, *w, epsilon = 1e-10);
        }
    }
}

#[test]
fn embed_is_linear_and_rejects_non_hermitian() {
    let a = DMatrix::from_row_slice(
        2,
        2,
        &[
            C64::new(1.0, 0.0),
            C64::new(0.5, 0.2),
            C64::new(0.5, -0.2),
            C64::new(-1.0, 0.0),
        ],
    );
    let b = DMatrix::from_row_slice(
        2,
        2,
        &[
            C64::new(0.3, 0.0),
            C64::new(0.0, -1.0),
            C64::new(0.0, 1.0),
            C64::new(2.0, 0.0),
        ],
    );
    let lhs = hermitian_embed(&(&a * C64::new(2.0, 0.0) + &b)).unwrap();
    let rhs = hermitian_embed(&a).unwrap() * 2.0 + hermitian_embed(&b).unwrap();
    assert!((lhs - rhs).norm() < 1e-14);

    let mut bad = a.clone();
    bad[(0, 1)] = C64::new(3.0, 0.0);
    assert!(hermitian_embed(&bad).is_err());
}

fn cone_strategy() -> impl Strategy<Value = (Cone, Vec<f64>, Vec<f64>)> {
    prop_oneof![
        (1usize..6).prop_map(Cone::NonNeg),
        (1usize..7).prop_map(Cone::SecondOrder),
        (1usize..5).prop_map(Cone::Psd),
    ]
    .prop_flat_map(|c| {
        let d = c.dim();
        (
            Just(c),
            prop::collection::vec(-10.0..10.0f64, d),
            prop::collection::vec(-10.0..10.0f64, d),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn projections_are_idempotent((cone, u, _v) in cone_strategy()) {
        let mut p = u.clone();
        cone.project(&mut p).unwrap();
        let mut pp = p.clone();
        cone.project(&mut pp).unwrap();
        prop_assert!(diff(&p, &pp) <= 1e-12 * (1.0 + norm(&p)));
    }

    #[test]
    fn projections_are_non_expansive((cone, u, v) in cone_strategy()) {
        let (mut pu, mut pv) = (u.clone(), v.clone());
        cone.project(&mut pu).unwrap();
        cone.project(&mut pv).unwrap();
        prop_assert!(diff(&pu, &pv) <= diff(&u, &v) + 1e-12);
    }

    #[test]
    fn psd_projection_of_embedding_is_fixed(vals in prop::collection::vec(-1.0..1.0f64, 18)) {
        let b = DMatrix::from_fn(3, 3, |i, j| C64::new(vals[3 * i + j], vals[9 + 3 * i + j]));
        let e = hermitian_embed(&(&b * b.adjoint())).unwrap();
        prop_assert!((project_psd(&e).unwrap() - &e).norm() <= 1e-10 * (1.0 + e.norm()));
    }
}

fn problem(
    c: Vec<f64>,
    rows: usize,
    trip: &[(usize, usize, f64)],
    b: Vec<f64>,
    cones: Vec<Cone>,
) -> ConicProblem {
    let a = CscMatrix::from_triplets(rows, c.len(), trip).unwrap();
    ConicProblem::new(c, a, b, ConeSpec::new(cones)).unwrap()
}

/// Checks the contract of a converged result.
fn check_converged(p: &ConicProblem, r: &panm::conic::SolverResult, tol: f64) {
    assert_eq!(r.status, Status::Converged);
    assert!(r.max_residual() <= tol);
    let mut ax = vec![0.0; p.num_rows()];
    p.a.mul_vec(&r.x, &mut ax);
    let bmax = p.b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for ((a, s), b) in ax.iter().zip(&r.s).zip(&p.b) {
        assert!((a + s - b).abs() <= tol * (1.0 + bmax) * 1.0001);
    }
    for (off, cone) in p.cones.offsets() {
        if !matches!(cone, Cone::Zero(_)) {
            assert!(cone.contains(&r.s[off..off + cone.dim()], tol).unwrap());
        }
    }
    assert!(r.dual_objective <= r.objective + tol * (1.0 + r.objective.abs()));
}

#[test]
fn lp_single_bound() {
    // minimize x subject to x >= 1, i.e. -x + s = -1 with s >= 0.
    let p = problem(
        vec![1.0],
        1,
        &[(0, 0, -1.0)],
        vec![-1.0],
        vec![Cone::NonNeg(1)],
    );
    let r = solve(&p, &Settings::default()).unwrap();
    check_converged(&p, &r, 1e-6);
    assert_abs_diff_eq!(r.x[0], 1.0, epsilon = 1e-4);
    assert_abs_diff_eq!(r.objective, 1.0, epsilon = 1e-4);
}

#[test]
fn sdp_trace_with_fixed_corner() {
    // X = svec (x11, sqrt2 x21, x22); minimize x11 + x22 with x11 = 1.
    let s2 = std::f64::consts::SQRT_2;
    let p = problem(
        vec![1.0, 0.0, 1.0],
        4,
        &[(0, 0, 1.0), (1, 0, -1.0), (2, 1, -s2), (3, 2, -1.0)],
        vec![1.0, 0.0, 0.0, 0.0],
        vec![Cone::Zero(1), Cone::Psd(2)],
    );
    let r = solve(&p, &Settings::default()).unwrap();
    check_converged(&p, &r, 1e-6);
    assert_abs_diff_eq!(r.objective, 1.0, epsilon = 1e-4);
    let x = smat(&r.s[1..], 2);
    let want = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
    assert!((x - want).norm() <= 1e-4);
}

struct RandomSocp {
    c: [f64; 5],
    /// `|x| <= RADIUS` plus two rows of `|A_i x + b_i| <= d_i'x + e_i`.
    a: [[[f64; 5]; 2]; 2],
    b: [[f64; 2]; 2],
    d: [[f64; 5]; 2],
    e: [f64; 2],
}

const RADIUS: f64 = 1.5;

impl RandomSocp {
    fn draw(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut u = || rng.random_range(-1.0..1.0);
        let mut s = RandomSocp {
            c: [0.0; 5],
            a: [[[0.0; 5]; 2]; 2],
            b: [[0.0; 2]; 2],
            d: [[0.0; 5]; 2],
            e: [0.0; 2],
        };
        s.c = [u(), u(), u(), u(), u()];
        for i in 0..2 {
            for k in 0..2 {
                s.a[i][k] = [u(), u(), u(), u(), u()];
                s.b[i][k] = 0.3 * u();
            }
            s.d[i] = [0.3 * u(), 0.3 * u(), 0.3 * u(), 0.3 * u(), 0.3 * u()];
            // Keeps the origin strictly feasible.
            s.e[i] = 0.6 + 0.5 * u().abs();
        }
        s
    }

    fn feasible(&self, x: &[f64; 5]) -> bool {
        if norm(x) > RADIUS {
            return false;
        }
        (0..2).all(|i| {
            let lin: f64 = (0..5).map(|j| self.d[i][j] * x[j]).sum::<f64>() + self.e[i];
            let r: Vec<f64> = (0..2)
                .map(|k| (0..5).map(|j| self.a[i][k][j] * x[j]).sum::<f64>() + self.b[i][k])
                .collect();
            norm(&r) <= lin
        })
    }

    fn cost(&self, x: &[f64; 5]) -> f64 {
        (0..5).map(|j| self.c[j] * x[j]).sum()
    }

    fn to_problem(&self) -> ConicProblem {
        // Rows: ball SOC (6), then two 3-d SOCs.
        let mut trip = Vec::new();
        let mut b = vec![RADIUS, 0.0, 0.0, 0.0, 0.0, 0.0];
        for j in 0..5 {
            trip.push((1 + j, j, -1.0));
        }
        for i in 0..2 {
            let r0 = 6 + 3 * i;
            b.push(self.e[i]);
            for j in 0..5 {
                trip.push((r0, j, -self.d[i][j]));
            }
            for k in 0..2 {
                b.push(self.b[i][k]);
                for j in 0..5 {
                    trip.push((r0 + 1 + k, j, -self.a[i][k][j]));
                }
            }
        }
        problem(
            self.c.to_vec(),
            12,
            &trip,
            b,
            vec![
                Cone::SecondOrder(6),
                Cone::SecondOrder(3),
                Cone::SecondOrder(3),
            ],
        )
    }

    /// Zooming grid search: best feasible point of a 9^5 lattice, recentre
    /// on it, and shrink the box once a pass stops improving much.
    fn grid_oracle(&self) -> f64 {
        let mut centre = [0.0; 5];
        let mut half = RADIUS;
        let mut best = self.cost(&centre);
        let k = 9usize;
        for _ in 0..200 {
            let before = best;
            let mut next = centre;
            for idx in 0..k.pow(5) {
                let mut x = [0.0; 5];
                let mut r = idx;
                for (xj, cj) in x.iter_mut().zip(&centre) {
                    let t = (r % k) as f64 / (k - 1) as f64;
                    *xj = cj + half * (2.0 * t - 1.0);
                    r /= k;
                }
                if self.feasible(&x) {
                    let f = self.cost(&x);
                    if f < best {
                        best = f;
                        next = x;
                    }
                }
            }
            centre = next;
            if before - best < 0.1 * half {
                half *= 0.8;
            }
            if half < 1e-7 {
                break;
            }
        }
        best
    }
}

/// Lower bound `-b'z` from a dual point, checked independently of the
/// solver: `z` must lie in the (self-dual) cones and satisfy `c + A'z = 0`.
fn certified_lower_bound(p: &ConicProblem, z: &[f64]) -> f64 {
    for (off, cone) in p.cones.offsets() {
        assert!(cone.contains(&z[off..off + cone.dim()], 1e-9).unwrap());
    }
    let mut atz = vec![0.0; p.num_vars()];
    p.a.tr_mul_vec(z, &mut atz);
    let bz: f64 = p.b.iter().zip(z).map(|(b, z)| b * z).sum();
    // A small stationarity defect is charged against the bound using the
    // ball |x| <= RADIUS that every feasible point satisfies.
    let defect: Vec<f64> = p.c.iter().zip(&atz).map(|(c, a)| c + a).collect();
    -bz - RADIUS * norm(&defect)
}

#[test]
fn random_socp_matches_grid_search() {
    for seed in [11, 12, 13] {
        let socp = RandomSocp::draw(seed);
        let p = socp.to_problem();
        let r = solve(&p, &Settings::default().with_tol(1e-8)).unwrap();
        check_converged(&p, &r, 1e-8);
        let oracle = socp.grid_oracle();
        // The oracle only visits feasible points, so it can never beat the
        // true optimum; it approaches it from above.
        assert!(r.objective <= oracle + 1e-8, "seed {seed}");
        assert!(
            oracle - r.objective <= 1e-3,
            "seed {seed}: solver {} oracle {oracle}",
            r.objective
        );
        let lower = certified_lower_bound(&p, &r.z);
        assert!(lower <= r.objective + 1e-9);
        assert!(r.objective - lower <= 1e-4, "seed {seed}: certified gap");
    }
}

#[test]
fn flags_primal_infeasible_lp() {
    // x >= 1 and x <= 0.
    let p = problem(
        vec![1.0],
        2,
        &[(0, 0, -1.0), (1, 0, 1.0)],
        vec![-1.0, 0.0],
        vec![Cone::NonNeg(2)],
    );
    let r = solve(&p, &Settings::default()).unwrap();
    assert_eq!(r.status, Status::InfeasibleSuspected);
}

#[test]
fn flags_unbounded_lp() {
    // minimize -x subject to x >= 0.
    let p = problem(
        vec![-1.0],
        1,
        &[(0, 0, -1.0)],
        vec![0.0],
        vec![Cone::NonNeg(1)],
    );
    let r = solve(&p, &Settings::default()).unwrap();
    assert_eq!(r.status, Status::InfeasibleSuspected);
}

#[test]
fn max_iter_is_reported() {
    let socp = RandomSocp::draw(11).to_problem();
    let r = solve(&socp, &Settings::default().with_max_iter(3)).unwrap();
    assert_eq!(r.status, Status::MaxIter);
    assert_eq!(r.iterations, 3);
}

#[test]
fn dimension_mismatch_is_an_error() {
    let a = CscMatrix::from_triplets(2, 1, &[(0, 0, 1.0)]).unwrap();
    let err = ConicProblem::new(
        vec![1.0],
        a,
        vec![0.0, 0.0],
        ConeSpec::new(vec![Cone::NonNeg(1)]),
    );
    assert!(err.is_err());
}

#[test]
fn text_round_trip() {
    let p = RandomSocp::draw(13).to_problem();
    let back = problem_from_text(&problem_to_text(&p)).unwrap();
    assert_eq!(back, p);
    assert!(problem_from_text("conic rows 1 cols 1\ncones nonneg:1\nc 1\nb x\n").is_err());
}
