//! JSON Lines instance files.
//!
//! One object per round: `{"t": 3, "points": [[x, y], …], "weights": [1.0, …]}`.
//! Explicit metrics put a header line `{"matrix": [[…], …]}` first and rounds then list
//! point ids instead of coordinates. `weights` is optional and defaults to 1.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::{MetricMode, MetricRegistry, WeightedInstance};

use super::generators::Ground;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Points {
    Ids(Vec<usize>),
    Coords(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoundLine {
    pub t: usize,
    pub points: Points,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    matrix: Vec<Vec<f64>>,
}

/// Parsed file contents: optional explicit metric and the rounds in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceFile {
    pub matrix: Option<Vec<Vec<f64>>>,
    pub rounds: Vec<RoundLine>,
}

pub fn parse(reader: impl BufRead) -> Result<InstanceFile> {
    let mut matrix = None;
    let mut rounds = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fail = |e: serde_json::Error| Error::InstanceFormat {
            line: lineno,
            msg: e.to_string(),
        };
        if matrix.is_none() && rounds.is_empty() && line.contains("\"matrix\"") {
            let h: Header = serde_json::from_str(&line).map_err(fail)?;
            matrix = Some(h.matrix);
            continue;
        }
        let r: RoundLine = serde_json::from_str(&line).map_err(fail)?;
        let n = match &r.points {
            Points::Ids(v) => v.len(),
            Points::Coords(v) => v.len(),
        };
        if let Some(w) = &r.weights {
            if w.len() != n {
                return Err(Error::InstanceFormat {
                    line: lineno,
                    msg: format!("{} weights for {n} points", w.len()),
                });
            }
        }
        match (&r.points, &matrix) {
            (Points::Coords(c), None) if !c.is_empty() || n == 0 => {}
            (Points::Ids(_), Some(_)) => {}
            (Points::Ids(v), None) if v.is_empty() => {}
            _ => {
                return Err(Error::InstanceFormat {
                    line: lineno,
                    msg: "rounds list coordinates without a matrix header, ids with one".into(),
                })
            }
        }
        rounds.push(r);
    }
    Ok(InstanceFile { matrix, rounds })
}

pub fn read(path: &Path) -> Result<InstanceFile> {
    parse(BufReader::new(std::fs::File::open(path)?))
}

/// Unit-weight rounds as a ground set plus ground indices per round.
///
/// Coordinates repeated across rounds map to one ground index.
pub fn read_rounds(path: &Path) -> Result<(Ground, Vec<Vec<usize>>)> {
    to_rounds(read(path)?)
}

pub fn to_rounds(file: InstanceFile) -> Result<(Ground, Vec<Vec<usize>>)> {
    for (i, r) in file.rounds.iter().enumerate() {
        if let Some(w) = &r.weights {
            if w.iter().any(|&x| x != 1.0) {
                return Err(Error::InstanceFormat {
                    line: i + 1,
                    msg: "raw rounds must have unit weights".into(),
                });
            }
        }
    }
    match file.matrix {
        Some(matrix) => {
            let n = matrix.len();
            let mut rounds = Vec::new();
            for r in file.rounds {
                let Points::Ids(ids) = r.points else { unreachable!() };
                if let Some(&bad) = ids.iter().find(|&&i| i >= n) {
                    return Err(Error::UnknownPoint(bad));
                }
                rounds.push(ids);
            }
            Ok((Ground::Explicit { matrix }, rounds))
        }
        None => {
            let mut points: Vec<Vec<f64>> = Vec::new();
            let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
            let mut rounds = Vec::new();
            let mut dim = None;
            for (i, r) in file.rounds.into_iter().enumerate() {
                let coords = match r.points {
                    Points::Coords(c) => c,
                    Points::Ids(_) => Vec::new(),
                };
                let mut ids = Vec::with_capacity(coords.len());
                for p in coords {
                    let d = *dim.get_or_insert(p.len());
                    if p.len() != d {
                        return Err(Error::InstanceFormat {
                            line: i + 1,
                            msg: format!("point of dimension {} in a {d}-dimensional file", p.len()),
                        });
                    }
                    let key: Vec<u64> = p.iter().map(|c| (c + 0.0).to_bits()).collect();
                    let id = *index.entry(key).or_insert_with(|| {
                        points.push(p);
                        points.len() - 1
                    });
                    ids.push(id);
                }
                rounds.push(ids);
            }
            Ok((
                Ground::Euclidean {
                    dim: dim.unwrap_or(0),
                    points,
                },
                rounds,
            ))
        }
    }
}

/// One round as a JSON line: coordinates in Euclidean mode, ids in explicit mode.
pub fn round_line(reg: &MetricRegistry, inst: &WeightedInstance) -> Result<RoundLine> {
    let points = match reg.mode() {
        MetricMode::Euclidean => Points::Coords(
            inst.members
                .iter()
                .map(|&(p, _)| reg.coords(p).map(<[f64]>::to_vec).ok_or(Error::UnknownPoint(p.0)))
                .collect::<Result<_>>()?,
        ),
        MetricMode::Explicit => Points::Ids(inst.members.iter().map(|m| m.0 .0).collect()),
    };
    let weights: Vec<f64> = inst.members.iter().map(|m| m.1).collect();
    Ok(RoundLine {
        t: inst.round,
        points,
        weights: weights.iter().any(|&w| w != 1.0).then_some(weights),
    })
}

/// Writes rounds (raw or reduced) in the file format, with a header in explicit mode.
pub fn write(
    mut out: impl Write,
    reg: &MetricRegistry,
    matrix: Option<&[Vec<f64>]>,
    rounds: &[WeightedInstance],
) -> Result<()> {
    if let Some(m) = matrix {
        serde_json::to_writer(&mut out, &Header { matrix: m.to_vec() })?;
        writeln!(out)?;
    }
    for r in rounds {
        serde_json::to_writer(&mut out, &round_line(reg, r)?)?;
        writeln!(out)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::PointId;

    #[test]
    fn euclidean_roundtrip() {
        let text = "{\"t\":0,\"points\":[[0,0],[1,0],[0,1]]}\n\n{\"t\":1,\"points\":[[1,0],[2,2]],\"weights\":[1,1]}\n";
        let (ground, rounds) = to_rounds(parse(text.as_bytes()).unwrap()).unwrap();
        assert_eq!(ground.len(), 4);
        assert_eq!(rounds, vec![vec![0, 1, 2], vec![1, 3]]);
    }

    #[test]
    fn explicit_header() {
        let text = "{\"matrix\":[[0,2],[2,0]]}\n{\"t\":0,\"points\":[0,1]}\n";
        let (ground, rounds) = to_rounds(parse(text.as_bytes()).unwrap()).unwrap();
        assert_eq!(ground.distance(0, 1), 2.0);
        assert_eq!(rounds, vec![vec![0, 1]]);
        let bad = "{\"matrix\":[[0,2],[2,0]]}\n{\"t\":0,\"points\":[0,5]}\n";
        assert!(to_rounds(parse(bad.as_bytes()).unwrap()).is_err());
    }

    #[test]
    fn malformed_lines_report_position() {
        let text = "{\"t\":0,\"points\":[[0,0]]}\n{\"t\":1,\"points\":[[0,0]],\"weights\":[1,2]}\n";
        match parse(text.as_bytes()) {
            Err(Error::InstanceFormat { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(parse("{\"t\":0}\n".as_bytes()).is_err());
    }

    #[test]
    fn weighted_rounds_write_and_parse() {
        let mut reg = MetricRegistry::euclidean(2);
        let a = reg.insert(&[0.0, 0.0]).unwrap();
        let b = reg.insert(&[3.0, 4.0]).unwrap();
        let inst = WeightedInstance::weighted(2, vec![(a, 0.5), (b, 1.5)]).unwrap();
        let mut buf = Vec::new();
        write(&mut buf, &reg, None, &[inst]).unwrap();
        let f = parse(buf.as_slice()).unwrap();
        assert_eq!(f.rounds[0].t, 2);
        assert_eq!(f.rounds[0].weights, Some(vec![0.5, 1.5]));
        assert!(to_rounds(f).is_err());

        let m = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        let reg = MetricRegistry::from_matrix(&m).unwrap();
        let mut buf = Vec::new();
        write(&mut buf, &reg, Some(&m), &[WeightedInstance::unit(0, [PointId(1)])]).unwrap();
        let f = parse(buf.as_slice()).unwrap();
        assert_eq!(f.matrix, Some(m));
        assert_eq!(f.rounds[0].points, Points::Ids(vec![1]));
    }
}
