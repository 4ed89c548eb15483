use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use drmc::calibration::{evaluate_cells, LossGrid};
use drmc::exec::Execution;
use drmc::proposal::{DimProposal, ProposalSpec, ThreeGaussianPair};
use drmc::sampler::{run_chains, ChainConfig, InitialState, SamplerMode, Termination};
use drmc::targets::{IslandCombConfig, IslandDim, TargetSpec};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn ap_cells(c: &mut Criterion) {
    let grid: Vec<f64> = (1..=4).map(|i| i as f64 / 5.0).collect();
    let cells = LossGrid::ap_cells(&[0.04], &[0.04, 0.2], &grid, &grid);
    let mut g = c.benchmark_group("ap_cells");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::new(name, cells.len()), |b| {
            b.iter(|| evaluate_cells(&cells, 20_000, 1, exec).unwrap())
        });
    }
    g.finish();
}

fn chains(c: &mut Criterion) {
    let config = ChainConfig {
        target: TargetSpec::island_comb(IslandCombConfig {
            n_modes: 5,
            spacing: 1.25,
            mode_width: 0.2,
            weight_decay: 0.6,
            dims: vec![IslandDim::Comb],
        })
        .unwrap(),
        spec: ProposalSpec::new(vec![DimProposal::ThreeGaussian(ThreeGaussianPair {
            sigma1: 0.2,
            sigma2: 0.2,
            mu: 1.25,
            na: 0.15,
            nb: 0.95,
        })])
        .unwrap(),
        base_widths: vec![0.15],
        p_dr: 0.05,
        p_bj: 0.0,
        n_dr: 50,
        termination: Termination::Iterations(20_000),
        seed: 3,
        mode: SamplerMode::DelayedRejection,
        initial: InitialState::Point(vec![0.0]),
    };
    let mut g = c.benchmark_group("dr_chains");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::new(name, 8), |b| b.iter(|| run_chains(&config, 8, exec).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, ap_cells, chains);
criterion_main!(benches);
