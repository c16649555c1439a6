//! Plain-text cloud files.
//!
//! One point per line: three whitespace-separated reals `x y z`, with an
//! optional fourth column giving that correspondence's sigma. Blank lines
//! and lines starting with `#` are skipped. Model and scene live in separate
//! files; correspondence is by line order. When both files carry a sigma
//! column the scene's wins; with neither, [`DEFAULT_SIGMA`] applies.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::ProblemInstance;
use crate::so3::Vec3;

/// Noise level assumed when a file carries no sigma column.
pub const DEFAULT_SIGMA: f64 = 0.01;

/// Reads one cloud: points plus the optional per-line sigma.
pub fn load_cloud(path: &Path) -> Result<(Vec<Vec3>, Vec<Option<f64>>)> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    parse_cloud(&text, &path.display().to_string())
}

fn parse_cloud(text: &str, path: &str) -> Result<(Vec<Vec3>, Vec<Option<f64>>)> {
    let mut points = Vec::new();
    let mut sigmas = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 && fields.len() != 4 {
            return Err(Error::CloudParse {
                path: path.to_string(),
                line: lineno + 1,
                message: format!("expected 3 or 4 columns, found {}", fields.len()),
            });
        }
        let mut values = [0.0f64; 4];
        for (k, field) in fields.iter().enumerate() {
            values[k] = field.parse().map_err(|_| Error::CloudParse {
                path: path.to_string(),
                line: lineno + 1,
                message: format!("cannot parse {field:?} as a number"),
            })?;
        }
        points.push(Vec3::new(values[0], values[1], values[2]));
        sigmas.push(if fields.len() == 4 { Some(values[3]) } else { None });
    }
    Ok((points, sigmas))
}

/// Loads a model/scene pair into a validated instance.
pub fn load_instance(model_path: &Path, scene_path: &Path) -> Result<ProblemInstance> {
    let (model, model_sigmas) = load_cloud(model_path)?;
    let (scene, scene_sigmas) = load_cloud(scene_path)?;
    if model.len() != scene.len() {
        return Err(Error::LengthMismatch {
            model: model.len(),
            scene: scene.len(),
        });
    }
    let sigmas: Vec<f64> = scene_sigmas
        .iter()
        .zip(&model_sigmas)
        .map(|(s, m)| s.or(*m).unwrap_or(DEFAULT_SIGMA))
        .collect();
    ProblemInstance::new(model, scene, sigmas)
}

/// Writes a cloud in the same format, one `x y z [sigma]` line per point.
pub fn save_cloud(path: &Path, points: &[Vec3], sigmas: Option<&[f64]>) -> Result<()> {
    let mut out = String::new();
    for (i, p) in points.iter().enumerate() {
        match sigmas {
            Some(s) => out.push_str(&format!("{:e} {:e} {:e} {:e}\n", p.x, p.y, p.z, s[i])),
            None => out.push_str(&format!("{:e} {:e} {:e}\n", p.x, p.y, p.z)),
        }
    }
    fs::write(path, out).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_three_and_four_column_lines() {
        let text = "# demo cloud\n1 2 3\n4.5 -6 7e-1 0.05\n\n0 0 1\n";
        let (points, sigmas) = parse_cloud(text, "demo").unwrap();
        assert_eq!(points.len(), 3);
        assert_eq!(points[1], Vec3::new(4.5, -6.0, 0.7));
        assert_eq!(sigmas, vec![None, Some(0.05), None]);
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(matches!(
            parse_cloud("1 2\n", "demo"),
            Err(Error::CloudParse { line: 1, .. })
        ));
        assert!(matches!(
            parse_cloud("1 2 three\n", "demo"),
            Err(Error::CloudParse { .. })
        ));
    }

    #[test]
    fn scene_sigma_wins_and_default_fills() {
        let dir = std::env::temp_dir().join("springreg_io_test");
        std::fs::create_dir_all(&dir).unwrap();
        let model_path = dir.join("model.txt");
        let scene_path = dir.join("scene.txt");
        std::fs::write(&model_path, "0 0 0 0.5\n1 0 0 0.5\n0 1 0\n").unwrap();
        std::fs::write(&scene_path, "0 0 0 0.2\n1 0 0\n0 1 0\n").unwrap();
        let instance = load_instance(&model_path, &scene_path).unwrap();
        assert_eq!(instance.sigmas(), &[0.2, 0.5, DEFAULT_SIGMA]);
    }

    #[test]
    fn save_load_roundtrip() {
        let dir = std::env::temp_dir().join("springreg_io_roundtrip");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("cloud.txt");
        let points = vec![
            Vec3::new(0.1, -2.0, 3.5e-7),
            Vec3::new(1.0, 2.0, 3.0),
            Vec3::new(-0.25, 0.5, 12.125),
        ];
        save_cloud(&path, &points, Some(&[0.01, 0.02, 0.03])).unwrap();
        let (loaded, sigmas) = load_cloud(&path).unwrap();
        assert_eq!(loaded, points);
        assert_eq!(sigmas, vec![Some(0.01), Some(0.02), Some(0.03)]);
    }
}
