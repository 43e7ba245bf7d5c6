//! Cross-treatment moment comparison on a common time grid.

use std::io::Write;

use serde::{Deserialize, Serialize};

use phaseflow::MomentSet;

/// One treatment's moment series as seen by the comparison.
pub struct Track<'a> {
    pub label: &'a str,
    pub times: &'a [f64],
    pub moments: &'a [MomentSet],
    pub stderr: Option<&'a [MomentSet]>,
}

/// Worst disagreement of one pair of treatments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairDeviation {
    pub a: String,
    pub b: String,
    pub max_abs: f64,
    pub t: f64,
    pub n: usize,
    pub k: usize,
    /// Largest `|a - b| / allowed` over the grid; at most 1 when the pair
    /// agrees everywhere.
    pub worst_ratio: f64,
    pub within: bool,
}

#[derive(Debug, Clone)]
pub struct Comparison {
    pub labels: Vec<String>,
    pub times: Vec<f64>,
    /// `(n, k)` with `1 <= n + k <= order`.
    pub pairs: Vec<(usize, usize)>,
    /// `values[track][time][pair]`.
    pub values: Vec<Vec<Vec<f64>>>,
    pub stderr: Vec<Option<Vec<Vec<f64>>>>,
    pub tolerance: f64,
    pub deviations: Vec<PairDeviation>,
}

/// Linear interpolation of `ys` sampled at increasing `ts`.
pub fn resample(ts: &[f64], ys: &[f64], t: f64) -> f64 {
    if ts.len() == 1 {
        return ys[0];
    }
    let j = ts.partition_point(|&s| s < t).clamp(1, ts.len() - 1);
    let (t0, t1) = (ts[j - 1], ts[j]);
    if t == t1 {
        return ys[j];
    }
    let u = (t - t0) / (t1 - t0);
    ys[j - 1] + u * (ys[j] - ys[j - 1])
}

fn allowed(tol: f64, sa: f64, sb: f64) -> f64 {
    tol.max(4.0 * (sa * sa + sb * sb).sqrt())
}

impl Comparison {
    /// Resamples every track onto the sample times of the coarsest one,
    /// clipped to the span all tracks cover.
    pub fn build(tracks: &[Track<'_>], order: usize, tolerance: f64) -> Option<Comparison> {
        let tracks: Vec<&Track> = tracks.iter().filter(|t| !t.times.is_empty()).collect();
        if tracks.is_empty() {
            return None;
        }
        let end = tracks
            .iter()
            .map(|t| *t.times.last().unwrap())
            .fold(f64::INFINITY, f64::min);
        let span = |t: &Track| t.times.iter().filter(|&&s| s <= end * (1.0 + 1e-12)).count();
        let coarse = tracks.iter().min_by_key(|t| span(t)).unwrap();
        let times: Vec<f64> = coarse.times[..span(coarse)].to_vec();
        let pairs: Vec<(usize, usize)> = (1..=order)
            .flat_map(|s| (0..=s).rev().map(move |n| (n, s - n)))
            .collect();
        let grid = |ts: &[f64], sets: &[MomentSet]| -> Vec<Vec<f64>> {
            let cols: Vec<Vec<f64>> = pairs
                .iter()
                .map(|&(n, k)| sets.iter().map(|m| m.get(n, k)).collect())
                .collect();
            times
                .iter()
                .map(|&t| cols.iter().map(|c| resample(ts, c, t)).collect())
                .collect()
        };
        let values: Vec<_> = tracks.iter().map(|t| grid(t.times, t.moments)).collect();
        let stderr: Vec<_> = tracks.iter().map(|t| t.stderr.map(|s| grid(t.times, s))).collect();
        let se = |i: usize, ti: usize, q: usize| stderr[i].as_ref().map_or(0.0, |s| s[ti][q]);
        let mut deviations = Vec::new();
        for a in 0..tracks.len() {
            for b in a + 1..tracks.len() {
                let mut worst = PairDeviation {
                    a: tracks[a].label.to_string(),
                    b: tracks[b].label.to_string(),
                    max_abs: 0.0,
                    t: 0.0,
                    n: 0,
                    k: 0,
                    worst_ratio: 0.0,
                    within: true,
                };
                for ti in 0..times.len() {
                    for (q, &(n, k)) in pairs.iter().enumerate() {
                        let d = (values[a][ti][q] - values[b][ti][q]).abs();
                        let r = d / allowed(tolerance, se(a, ti, q), se(b, ti, q));
                        if d > worst.max_abs || d.is_nan() {
                            worst.max_abs = d;
                            worst.t = times[ti];
                            worst.n = n;
                            worst.k = k;
                        }
                        if r > worst.worst_ratio || r.is_nan() {
                            worst.worst_ratio = r;
                        }
                    }
                }
                worst.within = worst.worst_ratio <= 1.0;
                deviations.push(worst);
            }
        }
        Some(Comparison {
            labels: tracks.iter().map(|t| t.label.to_string()).collect(),
            times,
            pairs,
            values,
            stderr,
            tolerance,
            deviations,
        })
    }

    pub fn max_deviation(&self) -> f64 {
        self.deviations.iter().map(|d| d.max_abs).fold(0.0, f64::max)
    }

    pub fn all_within(&self) -> bool {
        self.deviations.iter().all(|d| d.within)
    }

    /// Wide table: one row per time and moment, one column per treatment,
    /// then the worst pairwise gap, the tolerance it is held to and whether
    /// every pair agrees.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "t,n,k")?;
        for l in &self.labels {
            write!(w, ",{l}")?;
        }
        writeln!(w, ",max_abs_dev,tolerance,within")?;
        let m = self.labels.len();
        let se = |i: usize, ti: usize, q: usize| self.stderr[i].as_ref().map_or(0.0, |s| s[ti][q]);
        for (ti, t) in self.times.iter().enumerate() {
            for (q, &(n, k)) in self.pairs.iter().enumerate() {
                write!(w, "{t},{n},{k}")?;
                for i in 0..m {
                    write!(w, ",{}", self.values[i][ti][q])?;
                }
                let (mut dev, mut tol, mut ratio) = (0.0f64, self.tolerance, 0.0f64);
                for a in 0..m {
                    for b in a + 1..m {
                        let d = (self.values[a][ti][q] - self.values[b][ti][q]).abs();
                        let al = allowed(self.tolerance, se(a, ti, q), se(b, ti, q));
                        dev = dev.max(d);
                        if d / al > ratio {
                            ratio = d / al;
                            tol = al;
                        }
                    }
                }
                writeln!(w, ",{dev},{tol},{}", ratio <= 1.0)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use phaseflow::Flavor;

    fn set(x: f64) -> MomentSet {
        let mut m = MomentSet::new(1, Flavor::Classical);
        m.set(0, 0, 1.0);
        m.set(1, 0, x);
        m.set(0, 1, -x);
        m
    }

    #[test]
    fn resample_is_linear_and_hits_nodes() {
        let ts = [0.0, 1.0, 3.0];
        let ys = [0.0, 2.0, 6.0];
        assert_eq!(resample(&ts, &ys, 1.0), 2.0);
        assert_eq!(resample(&ts, &ys, 2.0), 4.0);
        assert_eq!(resample(&ts, &ys, 0.0), 0.0);
    }

    #[test]
    fn coarsest_grid_and_stochastic_tolerance() {
        let ta = [0.0, 0.5, 1.0];
        let ma: Vec<_> = ta.iter().map(|&t| set(t)).collect();
        let tb = [0.0, 0.25, 0.5, 0.75, 1.0];
        let mb: Vec<_> = tb.iter().map(|&t| set(t + 1e-3)).collect();
        let sb: Vec<_> = tb.iter().map(|_| set(1e-3)).collect();
        let tracks = [
            Track {
                label: "a",
                times: &ta,
                moments: &ma,
                stderr: None,
            },
            Track {
                label: "b",
                times: &tb,
                moments: &mb,
                stderr: Some(&sb),
            },
        ];
        let c = Comparison::build(&tracks, 1, 1e-6).unwrap();
        assert_eq!(c.times, ta.to_vec());
        assert_eq!(c.pairs, vec![(1, 0), (0, 1)]);
        assert!((c.max_deviation() - 1e-3).abs() < 1e-12);
        assert!(c.all_within());
        let tracks = [
            Track {
                label: "a",
                times: &ta,
                moments: &ma,
                stderr: None,
            },
            Track {
                label: "b",
                times: &tb,
                moments: &mb,
                stderr: None,
            },
        ];
        assert!(!Comparison::build(&tracks, 1, 1e-6).unwrap().all_within());
    }
}
