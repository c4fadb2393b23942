use std::path::Path;

use super::RegretTrace;
use crate::error::{Error, Result};

/// Up to `count` distinct log-spaced rounds in `[1, horizon]`, always including both ends.
pub fn checkpoints(horizon: u64, count: usize) -> Vec<u64> {
    if horizon == 0 || count == 0 {
        return Vec::new();
    }
    if count == 1 {
        return vec![horizon];
    }
    let top = (horizon as f64).ln();
    let mut out: Vec<u64> = (0..count)
        .map(|i| {
            let t = (top * i as f64 / (count - 1) as f64).exp().round() as u64;
            t.clamp(1, horizon)
        })
        .collect();
    out.dedup();
    if *out.last().unwrap() != horizon {
        out.push(horizon);
    }
    out
}

/// Mean and standard deviation of cumulative regret across runs.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmSummary {
    pub algorithm: String,
    pub n_runs: usize,
    pub mean: Vec<f64>,
    /// Population standard deviation.
    pub std: Vec<f64>,
}

impl AlgorithmSummary {
    pub fn final_mean(&self) -> f64 {
        self.mean.last().copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub checkpoints: Vec<u64>,
    pub algorithms: Vec<AlgorithmSummary>,
    /// Algorithm indices by increasing final mean regret.
    pub ranking: Vec<usize>,
}

impl Summary {
    /// Builds the summary from per-run `(algorithm, values at checkpoints)` lists.
    /// Algorithms keep their order of first appearance.
    pub fn from_checkpoint_values<'a, I>(checkpoints: Vec<u64>, runs: I) -> Result<Summary>
    where
        I: IntoIterator<Item = &'a [(String, Vec<f64>)]>,
    {
        let mut names: Vec<String> = Vec::new();
        let mut columns: Vec<Vec<&[f64]>> = Vec::new();
        for run in runs {
            for (name, values) in run {
                if values.len() != checkpoints.len() {
                    return Err(Error::Malformed(format!(
                        "'{name}' has {} checkpoint values, expected {}",
                        values.len(),
                        checkpoints.len()
                    )));
                }
                let idx = match names.iter().position(|n| n == name) {
                    Some(i) => i,
                    None => {
                        names.push(name.clone());
                        columns.push(Vec::new());
                        names.len() - 1
                    }
                };
                columns[idx].push(values);
            }
        }
        let algorithms: Vec<AlgorithmSummary> = names
            .into_iter()
            .zip(columns)
            .map(|(algorithm, runs)| {
                let m = runs.len() as f64;
                let mut mean = vec![0.0; checkpoints.len()];
                let mut std = vec![0.0; checkpoints.len()];
                for (j, (mu, sd)) in mean.iter_mut().zip(&mut std).enumerate() {
                    *mu = runs.iter().map(|v| v[j]).sum::<f64>() / m;
                    let var = runs.iter().map(|v| (v[j] - *mu).powi(2)).sum::<f64>() / m;
                    *sd = var.sqrt();
                }
                AlgorithmSummary {
                    algorithm,
                    n_runs: runs.len(),
                    mean,
                    std,
                }
            })
            .collect();
        let mut ranking: Vec<usize> = (0..algorithms.len()).collect();
        ranking.sort_by(|&a, &b| algorithms[a].final_mean().total_cmp(&algorithms[b].final_mean()));
        Ok(Summary {
            checkpoints,
            algorithms,
            ranking,
        })
    }

    pub fn get(&self, algorithm: &str) -> Option<&AlgorithmSummary> {
        self.algorithms.iter().find(|a| a.algorithm == algorithm)
    }

    /// Columns: `algorithm,t,mean,std,lower,upper` with a 2-std band.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
        w.write_record(["algorithm", "t", "mean", "std", "lower", "upper"])
            .map_err(|e| csv_err(path, e))?;
        for a in &self.algorithms {
            for (j, &t) in self.checkpoints.iter().enumerate() {
                let (m, s) = (a.mean[j], a.std[j]);
                w.write_record([
                    a.algorithm.clone(),
                    t.to_string(),
                    m.to_string(),
                    s.to_string(),
                    (m - 2.0 * s).to_string(),
                    (m + 2.0 * s).to_string(),
                ])
                .map_err(|e| csv_err(path, e))?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Plain-text ranking table.
    pub fn ranking_table(&self) -> String {
        let mut out = String::from("rank  final mean regret  2-std      algorithm\n");
        for (i, &a) in self.ranking.iter().enumerate() {
            let s = &self.algorithms[a];
            out.push_str(&format!(
                "{:>4}  {:>17.3}  {:>9.3}  {}\n",
                i + 1,
                s.final_mean(),
                2.0 * s.std.last().copied().unwrap_or(0.0),
                s.algorithm
            ));
        }
        out
    }
}

pub(super) fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// Summary of full traces at `count` log-spaced checkpoints.
pub fn summarize(traces: &[RegretTrace], count: usize) -> Result<Summary> {
    let horizon = traces.iter().map(|t| t.len()).min().unwrap_or(0) as u64;
    let grid = checkpoints(horizon, count);
    let mut by_run: Vec<(usize, Vec<(String, Vec<f64>)>)> = Vec::new();
    for tr in traces {
        let values = grid.iter().map(|&t| tr.cum_regret[t as usize - 1]).collect();
        match by_run.iter_mut().find(|(r, _)| *r == tr.run_id) {
            Some((_, v)) => v.push((tr.algorithm.clone(), values)),
            None => by_run.push((tr.run_id, vec![(tr.algorithm.clone(), values)])),
        }
    }
    Summary::from_checkpoint_values(grid, by_run.iter().map(|(_, v)| v.as_slice()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace(run_id: usize, name: &str, inst: &[f64]) -> RegretTrace {
        let mut cum = Vec::new();
        let mut c = 0.0;
        for r in inst {
            c += r;
            cum.push(c);
        }
        RegretTrace {
            run_id,
            seed: run_id as u64,
            algorithm: name.into(),
            inst_regret: inst.to_vec(),
            cum_regret: cum,
            arm: vec![0; inst.len()],
            selecting_rep: vec![None; inst.len()],
            active_set_size: vec![None; inst.len()],
        }
    }

    #[test]
    fn checkpoint_grid() {
        assert_eq!(checkpoints(1, 200), vec![1]);
        assert_eq!(checkpoints(3, 200), vec![1, 2, 3]);
        let g = checkpoints(50_000, 200);
        assert_eq!(g.first(), Some(&1));
        assert_eq!(g.last(), Some(&50_000));
        assert!(g.len() <= 200 && g.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn single_run_has_zero_band() {
        let s = summarize(&[trace(0, "a", &[1.0, 0.0, 2.0])], 200).unwrap();
        assert_eq!(s.algorithms[0].std, vec![0.0; 3]);
        assert_eq!(s.algorithms[0].mean, vec![1.0, 1.0, 3.0]);
    }

    #[test]
    fn identical_runs() {
        let s = summarize(&[trace(0, "a", &[1.0, 2.0]), trace(1, "a", &[1.0, 2.0])], 200).unwrap();
        assert_eq!(s.algorithms[0].mean, vec![1.0, 3.0]);
        assert_eq!(s.algorithms[0].std, vec![0.0, 0.0]);
    }

    #[test]
    fn ranking_by_final_mean() {
        let s = summarize(&[trace(0, "a", &[1.0, 2.0]), trace(0, "b", &[0.0, 1.0])], 200).unwrap();
        assert_eq!(s.ranking, vec![1, 0]);
        assert!(s.ranking_table().contains("b"));
    }
}
