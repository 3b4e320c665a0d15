use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::field::TimeField;
use crate::geom::Pose;
use crate::oracle::TimeGrid;

use super::metrics::{read_metrics_csv, MetricsRecord};

/// A regular 2D slice of `T(p, goal)` over two pose axes. All other start
/// components equal the goal's. With `swap` the query is `T(goal, p)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SliceRequest {
    pub goal: Pose,
    pub axes: [usize; 2],
    pub min: [f64; 2],
    pub max: [f64; 2],
    pub samples: [usize; 2],
    pub swap: bool,
}

impl SliceRequest {
    /// An x/y slice over `[min, max]` with `n × n` samples.
    pub fn xy(goal: Pose, min: [f64; 2], max: [f64; 2], n: usize) -> Self {
        SliceRequest {
            goal,
            axes: [0, 1],
            min,
            max,
            samples: [n, n],
            swap: false,
        }
    }

    /// Coordinate of sample `i` along slice axis `a`.
    pub fn coordinate(&self, a: usize, i: usize) -> f64 {
        let n = self.samples[a];
        if n < 2 {
            return self.min[a];
        }
        self.min[a] + (self.max[a] - self.min[a]) * i as f64 / (n - 1) as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlicePoint {
    pub u: f64,
    pub v: f64,
    pub time: f64,
}

pub fn sample_slice(field: &dyn TimeField, req: &SliceRequest) -> Result<Vec<SlicePoint>> {
    if req.axes.iter().any(|&a| a >= 6) || req.axes[0] == req.axes[1] {
        return Err(Error::invalid(
            "slice axes must be two distinct pose components",
        ));
    }
    let mut out = Vec::with_capacity(req.samples[0] * req.samples[1]);
    for i in 0..req.samples[0] {
        for j in 0..req.samples[1] {
            let (u, v) = (req.coordinate(0, i), req.coordinate(1, j));
            let mut a = req.goal.to_array();
            a[req.axes[0]] = u;
            a[req.axes[1]] = v;
            let p = Pose::from_array(a);
            let time = if req.swap {
                field.time(&req.goal, &p)?
            } else {
                field.time(&p, &req.goal)?
            };
            out.push(SlicePoint { u, v, time });
        }
    }
    Ok(out)
}

/// Writes `u,v,time`, plus `oracle_time` interpolated from `oracle` (empty
/// outside the grid) when given.
pub fn write_slice(path: &Path, points: &[SlicePoint], oracle: Option<&TimeGrid>) -> Result<()> {
    let mut out = String::from(if oracle.is_some() {
        "u,v,time,oracle_time\n"
    } else {
        "u,v,time\n"
    });
    for p in points {
        let _ = write!(out, "{},{},{}", p.u, p.v, p.time);
        if let Some(grid) = oracle {
            let z = grid.geometry.origin[2];
            match grid.value_at(&[p.u, p.v, z]) {
                Some(t) => {
                    let _ = write!(out, ",{t}");
                }
                None => out.push(','),
            }
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Equal-width bins over `[min, max]` of `values`: `(lo, hi, count)`.
pub fn histogram(values: &[f64], bins: usize) -> Vec<(f64, f64, usize)> {
    if values.is_empty() || bins == 0 {
        return Vec::new();
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo {
        (hi - lo) / bins as f64
    } else {
        1.0
    };
    let mut counts = vec![0; bins];
    for v in values {
        let b = (((v - lo) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(i, c)| (lo + i as f64 * width, lo + (i + 1) as f64 * width, c))
        .collect()
}

/// `metric,bin_lo,bin_hi,count` for planning time and successful lengths.
pub fn write_histograms(path: &Path, records: &[MetricsRecord], bins: usize) -> Result<()> {
    let times: Vec<f64> = records.iter().map(|r| r.planning_time_s).collect();
    let lengths: Vec<f64> = records.iter().filter_map(|r| r.length_m).collect();
    let mut out = String::from("metric,bin_lo,bin_hi,count\n");
    for (name, values) in [("planning_time_s", &times), ("length_m", &lengths)] {
        for (lo, hi, c) in histogram(values, bins) {
            let _ = writeln!(out, "{name},{lo},{hi},{c}");
        }
    }
    fs::write(path, out)?;
    Ok(())
}

/// A field slice to dump.
pub struct SliceJob<'a> {
    pub name: String,
    pub field: &'a dyn TimeField,
    pub request: SliceRequest,
    pub oracle: Option<&'a TimeGrid>,
}

/// Writes `histograms.csv` from the metrics file, `slice_<name>.csv` per
/// job, and, given a trajectory file from the benchmark, one
/// `trajectory_<query>.csv` polyline per planned query.
pub fn emit_plot_data(
    metrics_csv: &Path,
    trajectories: Option<&Path>,
    slices: &[SliceJob<'_>],
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    let records = read_metrics_csv(metrics_csv)?;
    let traj_text = match trajectories {
        Some(p) => Some(fs::read_to_string(p).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::FileNotFound(p.to_path_buf()),
            _ => Error::Io(e),
        })?),
        None => None,
    };
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    let hist = out_dir.join("histograms.csv");
    write_histograms(&hist, &records, 20)?;
    written.push(hist);
    for job in slices {
        let path = out_dir.join(format!("slice_{}.csv", job.name));
        write_slice(&path, &sample_slice(job.field, &job.request)?, job.oracle)?;
        written.push(path);
    }
    if let Some(text) = traj_text {
        let mut lines = text.lines();
        let header = lines.next().unwrap_or_default();
        let mut per_query: BTreeMap<String, String> = BTreeMap::new();
        for line in lines {
            let q = line.split(',').next().unwrap_or_default().to_string();
            let entry = per_query.entry(q).or_insert_with(|| format!("{header}\n"));
            entry.push_str(line);
            entry.push('\n');
        }
        for (q, body) in per_query {
            let path = out_dir.join(format!("trajectory_{q}.csv"));
            fs::write(&path, body)?;
            written.push(path);
        }
    }
    Ok(written)
}
