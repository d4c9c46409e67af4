use std::path::Path;

use super::read_text;
use crate::error::{Error, Result};
use crate::geometry::{PointCloud, Vec3};

/// Positions and, when the file carries them, normals as read from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct PointData {
    pub positions: Vec<Vec3>,
    pub normals: Option<Vec<Vec3>>,
}

impl PointData {
    /// Build a cloud, normalizing file normals to unit length.
    pub fn into_cloud(self, use_normals: bool) -> Result<PointCloud> {
        let cloud = PointCloud::new(self.positions)?;
        match self.normals {
            Some(normals) if use_normals => {
                let unit = normals
                    .into_iter()
                    .enumerate()
                    .map(|(i, n)| {
                        let len = n.norm();
                        if len > 0.0 && len.is_finite() {
                            Ok(n / len)
                        } else {
                            Err(Error::InvalidInput(format!("zero or non-finite normal at point {i}")))
                        }
                    })
                    .collect::<Result<Vec<_>>>()?;
                cloud.set_normals(unit)
            }
            _ => Ok(cloud),
        }
    }
}

/// Read `.xyz`, `.ply` (ASCII) or `.obj` by extension.
pub fn read_point_cloud(path: &Path) -> Result<PointData> {
    let text = read_text(path)?;
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .unwrap_or_default();
    let data = match ext.as_str() {
        "ply" => parse_ply(path, &text)?,
        "obj" => parse_obj(path, &text)?,
        _ => parse_xyz(path, &text)?,
    };
    let all = data
        .positions
        .iter()
        .chain(data.normals.iter().flatten())
        .enumerate();
    for (i, p) in all {
        if !p.iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "{}: non-finite value in record {}",
                path.display(),
                i % data.positions.len().max(1)
            )));
        }
    }
    Ok(data)
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_owned(),
        line,
        message: message.into(),
    }
}

fn numbers(path: &Path, line: usize, fields: &[&str]) -> Result<Vec<f64>> {
    fields
        .iter()
        .map(|f| {
            f.parse::<f64>()
                .map_err(|_| parse_err(path, line, format!("not a number: {f:?}")))
        })
        .collect()
}

fn parse_xyz(path: &Path, text: &str) -> Result<PointData> {
    let mut positions = Vec::new();
    let mut normals = Vec::new();
    let mut width = None;
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 && fields.len() != 6 {
            return Err(parse_err(path, ln + 1, format!("expected 3 or 6 columns, got {}", fields.len())));
        }
        if *width.get_or_insert(fields.len()) != fields.len() {
            return Err(parse_err(path, ln + 1, "inconsistent column count"));
        }
        let v = numbers(path, ln + 1, &fields)?;
        positions.push(Vec3::new(v[0], v[1], v[2]));
        if v.len() == 6 {
            normals.push(Vec3::new(v[3], v[4], v[5]));
        }
    }
    Ok(PointData {
        positions,
        normals: (width == Some(6)).then_some(normals),
    })
}

fn parse_obj(path: &Path, text: &str) -> Result<PointData> {
    let mut positions = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let mut it = line.split_whitespace();
        if it.next() != Some("v") {
            continue;
        }
        let fields: Vec<&str> = it.collect();
        if fields.len() < 3 {
            return Err(parse_err(path, ln + 1, "vertex needs 3 coordinates"));
        }
        let v = numbers(path, ln + 1, &fields[..3])?;
        positions.push(Vec3::new(v[0], v[1], v[2]));
    }
    Ok(PointData {
        positions,
        normals: None,
    })
}

fn parse_ply(path: &Path, text: &str) -> Result<PointData> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l.trim() == "ply" => {}
        _ => return Err(parse_err(path, 1, "missing 'ply' magic")),
    }
    let mut vertex_count = None;
    let mut props: Vec<String> = Vec::new();
    let mut in_vertex = false;
    let mut skip_before = 0usize;
    let mut header_done = false;
    for (ln, line) in lines.by_ref() {
        let f: Vec<&str> = line.split_whitespace().collect();
        match f.as_slice() {
            ["format", fmt, ..] if *fmt != "ascii" => {
                return Err(parse_err(path, ln + 1, format!("unsupported PLY format {fmt}")));
            }
            ["element", name, count] => {
                let count: usize = count
                    .parse()
                    .map_err(|_| parse_err(path, ln + 1, "bad element count"))?;
                in_vertex = *name == "vertex";
                if in_vertex {
                    vertex_count = Some(count);
                } else if vertex_count.is_none() {
                    // elements before the vertices are skipped line by line
                    skip_before += count;
                }
            }
            ["property", "list", ..] if in_vertex => {
                return Err(parse_err(path, ln + 1, "list properties on vertices are not supported"));
            }
            ["property", _, name] if in_vertex => props.push((*name).to_owned()),
            ["end_header"] => {
                header_done = true;
                break;
            }
            _ => {}
        }
    }
    if !header_done {
        return Err(parse_err(path, 1, "unterminated PLY header"));
    }
    let count = vertex_count.ok_or_else(|| parse_err(path, 1, "no vertex element"))?;
    let find = |name: &str| props.iter().position(|p| p == name);
    let xyz = ["x", "y", "z"].map(find);
    let nxyz = ["nx", "ny", "nz"].map(find);
    let [Some(ix), Some(iy), Some(iz)] = xyz else {
        return Err(parse_err(path, 1, "vertex element lacks x/y/z"));
    };
    let with_normals = nxyz.iter().all(Option::is_some);

    let mut body = lines.filter(|(_, l)| !l.trim().is_empty()).skip(skip_before);
    let mut positions = Vec::with_capacity(count);
    let mut normals = Vec::with_capacity(if with_normals { count } else { 0 });
    for _ in 0..count {
        let (ln, line) = body
            .next()
            .ok_or_else(|| parse_err(path, 0, format!("expected {count} vertices")))?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != props.len() {
            return Err(parse_err(path, ln + 1, format!("expected {} values", props.len())));
        }
        let v = numbers(path, ln + 1, &fields)?;
        positions.push(Vec3::new(v[ix], v[iy], v[iz]));
        if with_normals {
            let [nx, ny, nz] = nxyz.map(|i| v[i.unwrap()]);
            normals.push(Vec3::new(nx, ny, nz));
        }
    }
    Ok(PointData {
        positions,
        normals: with_normals.then_some(normals),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> &'static Path {
        Path::new("test")
    }

    #[test]
    fn xyz_with_and_without_normals() {
        let d = parse_xyz(p(), "0 0 0\n1 2 3\n\n# c\n").unwrap();
        assert_eq!(d.positions.len(), 2);
        assert!(d.normals.is_none());
        let d = parse_xyz(p(), "0 0 0 0 0 1\n1 2 3 0 0 2\n").unwrap();
        assert_eq!(d.normals.as_ref().unwrap()[1], Vec3::new(0.0, 0.0, 2.0));
        let cloud = d.into_cloud(true).unwrap();
        assert_eq!(cloud.normals().unwrap()[1], Vec3::z());
        assert!(parse_xyz(p(), "0 0\n").is_err());
        assert!(parse_xyz(p(), "0 0 0\n0 0 0 1 1 1\n").is_err());
        assert!(parse_xyz(p(), "0 0 a\n").is_err());
    }

    #[test]
    fn obj_reads_vertices_only() {
        let d = parse_obj(p(), "# x\nv 1 2 3\nvn 0 0 1\nv 4 5 6 1.0\nf 1 2 1\n").unwrap();
        assert_eq!(d.positions, vec![Vec3::new(1.0, 2.0, 3.0), Vec3::new(4.0, 5.0, 6.0)]);
    }

    #[test]
    fn ascii_ply() {
        let text = "ply\nformat ascii 1.0\ncomment hi\nelement vertex 2\nproperty float x\n\
                    property float y\nproperty float z\nproperty float nx\nproperty float ny\n\
                    property float nz\nproperty uchar red\nelement face 1\n\
                    property list uchar int vertex_indices\nend_header\n\
                    0 0 0 0 0 1 255\n1 0 0 0 0 1 0\n3 0 1 1\n";
        let d = parse_ply(p(), text).unwrap();
        assert_eq!(d.positions[1], Vec3::x());
        assert_eq!(d.normals.unwrap()[0], Vec3::z());
        assert!(parse_ply(p(), "ply\nformat binary_little_endian 1.0\nend_header\n").is_err());
        assert!(parse_ply(p(), "ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\nproperty float z\nend_header\n0 0 0\n").is_err());
    }
}
