mod common;

use common::{log_close, random_path, random_proposal, random_target};
use drmc::dr_engine::AlphaTable;
use drmc::oracle::{build_discrete_kernel, direct_alpha, direct_log_ratio, stationarity_residual, LatticeProposal};
use drmc::proposal::{DimProposal, ProposalSpec, ThreeGaussianPair};
use drmc::rng::rng_from_seed;
use drmc::targets::{LogTarget, TargetSpec};
use rand::Rng;

#[test]
fn table_matches_direct_recursion_every_row() {
    let mut rng = rng_from_seed(11);
    for _ in 0..200 {
        let dim = rng.random_range(1..3);
        let target = random_target(&mut rng, dim);
        let proposal = random_proposal(&mut rng, dim);
        let path = random_path(&mut rng, dim, 5);
        let mut table = AlphaTable::new(&proposal, &path[0], target.log_pi(&path[0])).unwrap();
        for k in 1..=5 {
            let alpha = table.extend(&path[k], target.log_pi(&path[k])).unwrap();
            let direct = direct_alpha(&path[..=k], &target, &proposal).unwrap();
            assert!(
                log_close(alpha.log_alpha, direct.ln(), 1e-10),
                "row {k}: table {} direct {}",
                alpha.log_alpha,
                direct.ln()
            );
            let e = table.leftmost(k).unwrap();
            let ratio = drmc::dr_engine::log_ratio(e.log_num, e.log_den);
            let want = direct_log_ratio(&path[..=k], &target, &proposal).unwrap();
            assert!(log_close(ratio, want, 1e-10), "row {k}: ratio {ratio} direct {want}");
        }
    }
}

#[test]
fn history_rows_match_subchain_oracle() {
    let mut rng = rng_from_seed(12);
    for _ in 0..50 {
        let target = random_target(&mut rng, 1);
        let proposal = random_proposal(&mut rng, 1);
        let path = random_path(&mut rng, 1, 4);
        let mut table = AlphaTable::with_history(&proposal, &path[0], target.log_pi(&path[0])).unwrap();
        for s in &path[1..] {
            table.extend(s, target.log_pi(s)).unwrap();
        }
        for k in 1..=4 {
            let row = table.row(k).unwrap();
            assert_eq!(row.len(), k);
            for (i, entry) in row.iter().enumerate() {
                let direct = direct_alpha(&path[i..=k], &target, &proposal).unwrap();
                assert!(log_close(entry.forward.log_alpha, direct.ln(), 1e-10), "entry ({i}, {k})");
            }
        }
    }
}

#[test]
fn oracle_detects_a_wrong_anchor() {
    // a proposal that anchors later stages at the start instead of the running mean
    struct Wrong(ProposalSpec);
    impl drmc::proposal::DrProposal for Wrong {
        fn dim(&self) -> usize {
            1
        }
        fn log_density(&self, role: drmc::proposal::StageRole, anchor: &[f64], candidate: &[f64]) -> f64 {
            self.0.log_density(role, anchor, candidate)
        }
        fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, role: drmc::proposal::StageRole, anchor: &[f64], out: &mut [f64]) {
            self.0.sample_into(rng, role, anchor, out)
        }
        fn central_anchor(&self, mean: &mut [f64]) {
            mean[0] = 0.0;
        }
    }
    let spec = ProposalSpec::three_gaussian(ThreeGaussianPair {
        sigma1: 0.5,
        sigma2: 0.3,
        mu: 1.0,
        na: 0.3,
        nb: 0.8,
    })
    .unwrap();
    let target = TargetSpec::gaussian_mixture(vec![1.0], vec![0.0], vec![1.0]).unwrap();
    let wrong = Wrong(spec.clone());
    let mut rng = rng_from_seed(13);
    let mut finite = 0;
    for _ in 0..200 {
        let path = random_path(&mut rng, 1, 3);
        let want = direct_log_ratio(&path, &target, &spec).unwrap();
        if !want.is_finite() {
            continue;
        }
        finite += 1;
        let mut table = AlphaTable::new(&wrong, &path[0], target.log_pi(&path[0])).unwrap();
        for s in &path[1..] {
            table.extend(s, target.log_pi(s)).unwrap();
        }
        let e = table.leftmost(3).unwrap();
        let got = drmc::dr_engine::log_ratio(e.log_num, e.log_den);
        assert!(!log_close(got, want, 1e-6), "wrong anchor went unnoticed on {path:?}");
    }
    assert!(finite > 20);
}

fn lattice_case(n: usize, seed: u64, zeros: bool) -> (TargetSpec, LatticeProposal) {
    let mut rng = rng_from_seed(seed);
    let mut p: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    if zeros {
        p[n / 2] = 0.0;
        p[1] = 0.0;
    }
    let pitch = 0.25;
    let target = TargetSpec::discrete_lattice(0.0, pitch, p).unwrap();
    let base = ProposalSpec::three_gaussian(ThreeGaussianPair {
        sigma1: rng.random_range(0.2..0.6),
        sigma2: rng.random_range(0.1..0.4),
        mu: pitch * rng.random_range(2..(n / 2)) as f64,
        na: rng.random_range(0.1..0.9),
        nb: rng.random_range(0.1..0.9),
    })
    .unwrap();
    let proposal = LatticeProposal::for_target(&target, base).unwrap();
    (target, proposal)
}

#[test]
fn lattice_kernels_are_stationary() {
    for (n, seed) in [(9, 1), (13, 2), (20, 3)] {
        for zeros in [false, true] {
            let (target, proposal) = lattice_case(n, seed, zeros);
            let (_, pi) = target.lattice().unwrap();
            for n_dr in 1..=3 {
                let k = build_discrete_kernel(&target, &proposal, n_dr).unwrap();
                assert!(k.row_sum_error() < 1e-12);
                assert!(k.matrix.iter().all(|v| (0.0..=1.0 + 1e-12).contains(v)));
                let r = stationarity_residual(&k, &pi).unwrap();
                assert!(r.stationarity < 1e-10, "n={n} n_dr={n_dr}: {r:?}");
                assert!(r.detailed_balance < 1e-10, "n={n} n_dr={n_dr}: {r:?}");
            }
        }
    }
}

#[test]
fn lattice_single_stage_is_metropolis_hastings() {
    let (target, proposal) = lattice_case(9, 5, false);
    let (x, pi) = target.lattice().unwrap();
    let k = build_discrete_kernel(&target, &proposal, 1).unwrap();
    let q = |i: usize, j: usize| {
        drmc::proposal::DrProposal::log_density(&proposal, drmc::proposal::StageRole::BigJump, &[x[i]], &[x[j]]).exp()
    };
    for i in 0..9 {
        for j in 0..9 {
            if i != j {
                let mh = q(i, j) * (pi[j] * q(j, i) / (pi[i] * q(i, j))).min(1.0);
                assert!((k.get(i, j) - mh).abs() < 1e-14);
            }
        }
    }
}

#[test]
fn more_stages_never_increase_staying_put() {
    let (target, proposal) = lattice_case(13, 7, false);
    let diag = |n_dr| {
        let k = build_discrete_kernel(&target, &proposal, n_dr).unwrap();
        (0..k.n()).map(|i| k.get(i, i)).collect::<Vec<_>>()
    };
    let (d1, d2, d3) = (diag(1), diag(2), diag(3));
    for i in 0..d1.len() {
        assert!(d2[i] <= d1[i] + 1e-14 && d3[i] <= d2[i] + 1e-14);
    }
}

#[test]
fn single_gaussian_proposal_checked_against_oracle() {
    let spec = ProposalSpec::new(vec![DimProposal::SingleGaussian { sigma: 0.7 }]).unwrap();
    let target = TargetSpec::gaussian_mixture(vec![0.3, 0.7], vec![-1.0, 1.5], vec![0.4, 0.6]).unwrap();
    let path: Vec<Vec<f64>> = [0.0, 0.8, -0.4, 1.9, 1.2].iter().map(|v| vec![*v]).collect();
    let mut table = AlphaTable::new(&spec, &path[0], target.log_pi(&path[0])).unwrap();
    for k in 1..path.len() {
        let a = table.extend(&path[k], target.log_pi(&path[k])).unwrap();
        let d = direct_alpha(&path[..=k], &target, &spec).unwrap();
        assert!(log_close(a.log_alpha, d.ln(), 1e-12));
    }
}
