//! Training tuples and their CSV file format.
//!
//! The file starts with `#` metadata lines carrying the scene hash and the
//! speed parameters, followed by a CSV table with a header row.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Pose;
use crate::speed::SpeedParams;

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetTuple {
    pub object_id: String,
    pub p_s: Pose,
    pub p_g: Pose,
    pub s_star_s: f64,
    pub s_star_g: f64,
}

#[derive(Serialize, Deserialize)]
struct Record {
    object_id: String,
    xs: f64,
    ys: f64,
    zs: f64,
    roll_s: f64,
    pitch_s: f64,
    yaw_s: f64,
    xg: f64,
    yg: f64,
    zg: f64,
    roll_g: f64,
    pitch_g: f64,
    yaw_g: f64,
    s_star_s: f64,
    s_star_g: f64,
}

impl From<&DatasetTuple> for Record {
    fn from(t: &DatasetTuple) -> Self {
        let s = t.p_s.to_array();
        let g = t.p_g.to_array();
        Record {
            object_id: t.object_id.clone(),
            xs: s[0],
            ys: s[1],
            zs: s[2],
            roll_s: s[3],
            pitch_s: s[4],
            yaw_s: s[5],
            xg: g[0],
            yg: g[1],
            zg: g[2],
            roll_g: g[3],
            pitch_g: g[4],
            yaw_g: g[5],
            s_star_s: t.s_star_s,
            s_star_g: t.s_star_g,
        }
    }
}

impl From<Record> for DatasetTuple {
    fn from(r: Record) -> Self {
        DatasetTuple {
            object_id: r.object_id,
            p_s: Pose::from_array([r.xs, r.ys, r.zs, r.roll_s, r.pitch_s, r.yaw_s]),
            p_g: Pose::from_array([r.xg, r.yg, r.zg, r.roll_g, r.pitch_g, r.yaw_g]),
            s_star_s: r.s_star_s,
            s_star_g: r.s_star_g,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub scene_hash: String,
    pub speed_params: SpeedParams,
    pub tuples: Vec<DatasetTuple>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    /// Distinct object ids in first-appearance order.
    pub fn object_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = Vec::new();
        for t in &self.tuples {
            if !ids.contains(&t.object_id) {
                ids.push(t.object_id.clone());
            }
        }
        ids
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = Vec::new();
        writeln!(out, "# scene_hash={}", self.scene_hash)?;
        let p = &self.speed_params;
        writeln!(
            out,
            "# s_const={:?} d_min={:?} d_max={:?}",
            p.s_const, p.d_min, p.d_max
        )?;
        {
            let mut w = csv::Writer::from_writer(&mut out);
            if self.tuples.is_empty() {
                w.write_record([
                    "object_id",
                    "xs",
                    "ys",
                    "zs",
                    "roll_s",
                    "pitch_s",
                    "yaw_s",
                    "xg",
                    "yg",
                    "zg",
                    "roll_g",
                    "pitch_g",
                    "yaw_g",
                    "s_star_s",
                    "s_star_g",
                ])
                .map_err(csv_io)?;
            }
            for t in &self.tuples {
                w.serialize(Record::from(t)).map_err(csv_io)?;
            }
            w.flush()?;
        }
        fs::write(path, out)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = fs::File::open(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::FileNotFound(path.to_path_buf()),
            _ => Error::Io(e),
        })?;
        let mut reader = BufReader::new(file);
        let mut scene_hash = None;
        let mut params = None;
        for line_no in 1..=2 {
            let mut line = String::new();
            reader.read_line(&mut line)?;
            let body = line
                .trim()
                .strip_prefix('#')
                .ok_or_else(|| {
                    Error::parse(path.display().to_string(), line_no, "missing metadata line")
                })?
                .trim();
            if let Some(h) = body.strip_prefix("scene_hash=") {
                scene_hash = Some(h.to_string());
            } else {
                let mut p = SpeedParams::default();
                for kv in body.split_whitespace() {
                    let (k, v) = kv.split_once('=').ok_or_else(|| {
                        Error::parse(path.display().to_string(), line_no, "expected key=value")
                    })?;
                    let v: f64 = v.parse().map_err(|_| {
                        Error::parse(
                            path.display().to_string(),
                            line_no,
                            format!("bad number {v:?}"),
                        )
                    })?;
                    match k {
                        "s_const" => p.s_const = v,
                        "d_min" => p.d_min = v,
                        "d_max" => p.d_max = v,
                        _ => {
                            return Err(Error::parse(
                                path.display().to_string(),
                                line_no,
                                format!("unknown key {k:?}"),
                            ))
                        }
                    }
                }
                params = Some(p);
            }
        }
        let (Some(scene_hash), Some(speed_params)) = (scene_hash, params) else {
            return Err(Error::parse(
                path.display().to_string(),
                1,
                "incomplete dataset header",
            ));
        };
        let mut rdr = csv::Reader::from_reader(reader);
        let mut tuples = Vec::new();
        for (i, rec) in rdr.deserialize::<Record>().enumerate() {
            let rec =
                rec.map_err(|e| Error::parse(path.display().to_string(), i + 4, e.to_string()))?;
            tuples.push(DatasetTuple::from(rec));
        }
        Ok(Dataset {
            scene_hash,
            speed_params,
            tuples,
        })
    }
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let ds = Dataset {
            scene_hash: "0123abcd".into(),
            speed_params: SpeedParams::default(),
            tuples: vec![
                DatasetTuple {
                    object_id: "box".into(),
                    p_s: Pose::new([0.1, 0.2, 1.0 / 3.0], [0.0, 0.1, -2.0]),
                    p_g: Pose::new([0.3, -0.2, 0.0], [1e-17, 0.0, 3.0]),
                    s_star_s: 0.7,
                    s_star_g: 1.0,
                },
                DatasetTuple {
                    object_id: "mug".into(),
                    p_s: Pose::identity(),
                    p_g: Pose::from_translation([0.5, 0.5, 0.5]),
                    s_star_s: 1.0 / 6.0,
                    s_star_g: 0.25,
                },
            ],
        };
        ds.save(&path).unwrap();
        assert_eq!(Dataset::load(&path).unwrap(), ds);
        assert_eq!(ds.object_ids(), vec!["box".to_string(), "mug".to_string()]);

        let empty = Dataset {
            tuples: Vec::new(),
            ..ds
        };
        empty.save(&path).unwrap();
        assert_eq!(Dataset::load(&path).unwrap(), empty);
    }

    #[test]
    fn missing_and_malformed_files() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            Dataset::load(&dir.path().join("nope.csv")),
            Err(Error::FileNotFound(_))
        ));
        let path = dir.path().join("bad.csv");
        fs::write(&path, "object_id,xs\nbox,1\n").unwrap();
        assert!(matches!(Dataset::load(&path), Err(Error::Parse { .. })));
    }
}
