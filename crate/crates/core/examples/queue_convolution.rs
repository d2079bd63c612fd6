//! Completion-time distributions of a machine queue.
//!
//! Each task's execution time is a discretized Gaussian; the completion time
//! of the i-th task is the convolution of the first i execution pmfs. The
//! example prints the pmfs, checks them against sampling, and shows the
//! probability that each task misses its processing deadline.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use v2i_edge::compute::{ExecutionTable, MachineQueue};
use v2i_edge::ScenarioConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = ScenarioConfig::default();
    let table = ExecutionTable::new(&config)?;
    let machine = 1;

    let mut queue = MachineQueue::new(machine);
    for (av, task) in [(10, 0), (11, 2), (12, 1), (13, 0)] {
        queue.push(av, task)?;
    }

    let mut rng = ChaCha20Rng::seed_from_u64(5);
    let draws = 20_000;
    let mut hist: Vec<Vec<usize>> = vec![Vec::new(); queue.len()];
    for _ in 0..draws {
        let s = table.sample_completion_steps(&queue, &mut rng);
        for (i, &(av, _)) in queue.entries.iter().enumerate() {
            let t = s[&av].completion_steps;
            if hist[i].len() < t {
                hist[i].resize(t, 0);
            }
            hist[i][t - 1] += 1;
        }
    }

    for (i, &(av, task)) in queue.entries.iter().enumerate() {
        let pmf = table.completion_pmf(&queue, av)?;
        let empirical: Vec<f64> = hist[i].iter().map(|&h| h as f64 / draws as f64).collect();
        let tv = 0.5
            * (0..pmf.len().max(empirical.len()))
                .map(|t| (pmf.p(t + 1) - empirical.get(t).copied().unwrap_or(0.0)).abs())
                .sum::<f64>();
        let limit = table.max_steps(task);
        println!(
            "position {i}: AV {av}, task {task}: mean {:.2} ms, mode {} steps, P(> {limit} steps) = {:.4}, TV to sampling {tv:.4}",
            pmf.mean_ms(),
            pmf.mode(),
            pmf.tail_above(limit),
        );
    }
    println!(
        "sum of expected completions: {:.3} ms (closed form {:.3} ms)",
        table.expected_completion_ms(&queue)?,
        table.expected_completion_ms_fast(machine, queue.entries.iter().map(|e| e.1))
    );
    Ok(())
}
