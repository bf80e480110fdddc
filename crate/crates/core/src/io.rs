//! Snapshot serialization: one CSV record per particle
//! (`id, x1..xd, v1..vd, w`) or a JSON document whose header carries
//! `dim`, `time` and `r`.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ensemble::{Ensemble, Particle, PhaseEnsemble, SphereEnsemble, Vec3};
use crate::error::{Result, SwarmError};
use crate::sphere::spherical_coords_3d;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleRecord {
    pub id: usize,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub w: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotDoc {
    pub dim: usize,
    pub time: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    pub particles: Vec<ParticleRecord>,
}

impl SnapshotDoc {
    pub fn from_ensemble<E: Ensemble + ?Sized>(ens: &E, r: Option<f64>) -> Self {
        let d = ens.dim();
        let particles = ens
            .particles()
            .iter()
            .enumerate()
            .map(|(id, p)| ParticleRecord {
                id,
                x: p.x.as_slice()[..d].to_vec(),
                v: p.v.as_slice()[..d].to_vec(),
                w: p.w,
            })
            .collect();
        Self { dim: d, time: ens.time(), r, particles }
    }

    fn particles(&self) -> Result<Vec<Particle>> {
        self.particles
            .iter()
            .map(|rec| {
                if rec.x.len() != self.dim || rec.v.len() != self.dim {
                    return Err(SwarmError::BadEnsemble(format!("record {} does not have {} components", rec.id, self.dim)));
                }
                Ok(Particle::new(lift(&rec.x), lift(&rec.v), rec.w))
            })
            .collect()
    }

    pub fn to_phase(&self) -> Result<PhaseEnsemble> {
        PhaseEnsemble::new(self.dim, self.particles()?, self.time)
    }

    /// Requires the `r` header field.
    pub fn to_sphere(&self) -> Result<SphereEnsemble> {
        let r = self.r.ok_or_else(|| SwarmError::BadEnsemble("sphere snapshot lacks the `r` header".into()))?;
        SphereEnsemble::new(self.dim, r, self.particles()?, self.time)
    }
}

fn lift(c: &[f64]) -> Vec3 {
    let mut out = Vec3::zeros();
    out.as_mut_slice()[..c.len()].copy_from_slice(c);
    out
}

fn header(dim: usize, angles: bool) -> Vec<String> {
    let mut cols = vec!["id".to_string()];
    cols.extend((1..=dim).map(|k| format!("x{k}")));
    cols.extend((1..=dim).map(|k| format!("v{k}")));
    cols.push("w".into());
    if angles {
        cols.push("theta".into());
        cols.push("phi".into());
    }
    cols
}

fn write_records<E: Ensemble + ?Sized, W: Write>(ens: &E, angles_r: Option<f64>, out: W) -> Result<()> {
    let d = ens.dim();
    let angles = angles_r.is_some() && d == 3;
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(header(d, angles))?;
    for (id, p) in ens.particles().iter().enumerate() {
        let mut row = vec![id.to_string()];
        row.extend(p.x.iter().take(d).map(|c| c.to_string()));
        row.extend(p.v.iter().take(d).map(|c| c.to_string()));
        row.push(p.w.to_string());
        if angles {
            let (theta, phi) = spherical_coords_3d(&p.v, angles_r.unwrap_or(1.0));
            row.push(theta.to_string());
            row.push(phi.to_string());
        }
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_phase_csv<W: Write>(ens: &PhaseEnsemble, out: W) -> Result<()> {
    write_records(ens, None, out)
}

/// In dimension 3 the spherical angles `(theta, phi)` of `omega` are
/// appended as two extra columns.
pub fn write_sphere_csv<W: Write>(ens: &SphereEnsemble, out: W) -> Result<()> {
    write_records(ens, Some(ens.r()), out)
}

/// Reads `(dim, particles)` from a CSV snapshot; extra columns are ignored.
pub fn read_csv<R: Read>(input: R) -> Result<(usize, Vec<Particle>)> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers()?.clone();
    let dim = headers.iter().filter(|h| h.starts_with('x')).count();
    if dim != 2 && dim != 3 {
        return Err(SwarmError::BadEnsemble(format!("CSV header implies dimension {dim}")));
    }
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| SwarmError::BadEnsemble(format!("CSV header lacks column `{name}`")))
    };
    let xs: Vec<usize> = (1..=dim).map(|k| col(&format!("x{k}"))).collect::<Result<_>>()?;
    let vs: Vec<usize> = (1..=dim).map(|k| col(&format!("v{k}"))).collect::<Result<_>>()?;
    let wc = col("w")?;
    let mut particles = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let num = |i: usize| -> Result<f64> {
            rec[i].trim().parse::<f64>().map_err(|e| SwarmError::BadEnsemble(format!("bad number `{}`: {e}", &rec[i])))
        };
        let x: Vec<f64> = xs.iter().map(|&i| num(i)).collect::<Result<_>>()?;
        let v: Vec<f64> = vs.iter().map(|&i| num(i)).collect::<Result<_>>()?;
        particles.push(Particle::new(lift(&x), lift(&v), num(wc)?));
    }
    Ok((dim, particles))
}

/// Loads a snapshot from `.json` or `.csv` (by extension).
pub fn load_snapshot(path: &Path) -> Result<SnapshotDoc> {
    let file = std::fs::File::open(path)?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => Ok(serde_json::from_reader(std::io::BufReader::new(file))?),
        _ => {
            let (dim, particles) = read_csv(std::io::BufReader::new(file))?;
            let ens = PhaseEnsemble::new(dim, particles, 0.0)?;
            Ok(SnapshotDoc::from_ensemble(&ens, None))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::project_measure;

    #[test]
    fn csv_and_json_agree() {
        let ens = PhaseEnsemble::uniform(
            3,
            [
                (Vec3::new(0.1, -0.2, 0.3), Vec3::new(1.0, 2.0, -0.5)),
                (Vec3::new(1.0, 1.0, 1.0), Vec3::new(-0.25, 0.0, 0.75)),
            ],
        )
        .unwrap()
        .with_time(0.5);
        let mut buf = Vec::new();
        write_phase_csv(&ens, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("id,x1,x2,x3,v1,v2,v3,w\n"));
        let (dim, particles) = read_csv(buf.as_slice()).unwrap();
        assert_eq!(dim, 3);
        assert_eq!(particles, ens.particles());

        let doc = SnapshotDoc::from_ensemble(&ens, Some(1.0));
        let json = serde_json::to_string(&doc).unwrap();
        let back: SnapshotDoc = serde_json::from_str(&json).unwrap();
        assert_eq!(back.to_phase().unwrap(), ens);
    }

    #[test]
    fn sphere_csv_carries_angles_in_3d() {
        let ens = PhaseEnsemble::uniform(3, [(Vec3::zeros(), Vec3::new(0.0, 2.0, 0.0))]).unwrap();
        let sph = project_measure(&ens, 2.0).unwrap();
        let mut buf = Vec::new();
        write_sphere_csv(&sph, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "id,x1,x2,x3,v1,v2,v3,w,theta,phi");
        let row: Vec<f64> = lines.next().unwrap().split(',').map(|c| c.parse().unwrap()).collect();
        assert_eq!(row[8], 0.0);
        assert!((row[9] - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
    }
}
