//! Point cloud, mesh and density-grid file formats.
//!
//! Point clouds: whitespace-separated XYZ text (`#` comments, extra columns
//! ignored) and ASCII PLY. Meshes: OBJ and ASCII PLY triangles. Density
//! grids: a little-endian binary layout, `"PUVX"`, `u32` version, `u32`
//! resolution, then `R³` `f32` densities and `R³` `f32` occupancy logits in
//! row-major cell order.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::metrics::TriangleMesh;
use crate::pointcloud::{Point, PointCloud};
use crate::voxel::{DensityField, Provenance, VoxelGrid};

const GRID_MAGIC: &[u8; 4] = b"PUVX";
const GRID_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PointFormat {
    Xyz,
    Ply,
}

impl PointFormat {
    /// `.ply` files are PLY; everything else is treated as XYZ text.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("ply") => PointFormat::Ply,
            _ => PointFormat::Xyz,
        }
    }
}

impl FromStr for PointFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "xyz" => Ok(PointFormat::Xyz),
            "ply" => Ok(PointFormat::Ply),
            _ => Err(Error::invalid(format!("unknown format `{s}` (expected xyz or ply)"))),
        }
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn format_error(path: &Path, message: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn parse_f64(path: &Path, line: usize, token: &str) -> Result<f64> {
    let v: f64 = token
        .parse()
        .map_err(|_| parse_error(path, line, format!("invalid number `{token}`")))?;
    if !v.is_finite() {
        return Err(parse_error(path, line, format!("non-finite coordinate `{token}`")));
    }
    Ok(v)
}

/// Reads a point cloud, choosing the format from the file extension.
pub fn read_pointcloud(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let points = match PointFormat::from_path(path) {
        PointFormat::Xyz => parse_xyz(path, &text)?,
        PointFormat::Ply => parse_ply(path, &text, true)?.0,
    };
    if points.is_empty() {
        return Err(format_error(path, "file contains no points"));
    }
    PointCloud::new(points)
}

fn parse_xyz(path: &Path, text: &str) -> Result<Vec<Point>> {
    let mut points = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
            .collect();
        if tokens.len() < 3 {
            return Err(parse_error(path, n + 1, "expected at least 3 columns"));
        }
        let c = [
            parse_f64(path, n + 1, tokens[0])?,
            parse_f64(path, n + 1, tokens[1])?,
            parse_f64(path, n + 1, tokens[2])?,
        ];
        points.push(Point::new(c[0], c[1], c[2]));
    }
    Ok(points)
}

struct PlyHeader {
    vertex_count: usize,
    vertex_props: Vec<String>,
    face_count: usize,
    body_start: usize,
}

fn parse_ply_header(path: &Path, lines: &[&str]) -> Result<PlyHeader> {
    if lines.first().map(|l| l.trim()) != Some("ply") {
        return Err(parse_error(path, 1, "missing `ply` magic"));
    }
    let mut header = PlyHeader {
        vertex_count: 0,
        vertex_props: Vec::new(),
        face_count: 0,
        body_start: 0,
    };
    let mut current = String::new();
    for (n, line) in lines.iter().enumerate().skip(1) {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens.as_slice() {
            ["format", "ascii", _] => {}
            ["format", other, ..] => {
                return Err(parse_error(path, n + 1, format!("unsupported PLY format `{other}` (ascii only)")))
            }
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", name, count] => {
                let count: usize = count
                    .parse()
                    .map_err(|_| parse_error(path, n + 1, "invalid element count"))?;
                current = name.to_string();
                match *name {
                    "vertex" => header.vertex_count = count,
                    "face" => header.face_count = count,
                    _ if count == 0 => {}
                    _ => {
                        return Err(parse_error(path, n + 1, format!("unsupported element `{name}`")))
                    }
                }
            }
            ["property", "list", _, _, name] => {
                if current != "face" || !matches!(*name, "vertex_indices" | "vertex_index") {
                    return Err(parse_error(path, n + 1, "unsupported list property"));
                }
            }
            ["property", _, name] => {
                if current == "vertex" {
                    header.vertex_props.push(name.to_string());
                } else {
                    return Err(parse_error(path, n + 1, "unsupported face property"));
                }
            }
            ["end_header"] => {
                header.body_start = n + 1;
                return Ok(header);
            }
            _ => return Err(parse_error(path, n + 1, format!("unrecognized header line `{line}`"))),
        }
    }
    Err(format_error(path, "missing end_header"))
}

type Faces = Vec<[usize; 3]>;

fn parse_ply(path: &Path, text: &str, fan: bool) -> Result<(Vec<Point>, Faces)> {
    let lines: Vec<&str> = text.lines().collect();
    let header = parse_ply_header(path, &lines)?;
    let column = |name: &str| {
        header
            .vertex_props
            .iter()
            .position(|p| p == name)
            .ok_or_else(|| format_error(path, format!("vertex property `{name}` missing")))
    };
    let cols = [column("x")?, column("y")?, column("z")?];
    let mut body = lines
        .iter()
        .enumerate()
        .skip(header.body_start)
        .filter(|(_, l)| !l.trim().is_empty());
    let mut points = Vec::with_capacity(header.vertex_count);
    for _ in 0..header.vertex_count {
        let (n, line) = body
            .next()
            .ok_or_else(|| format_error(path, "fewer vertex lines than declared"))?;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != header.vertex_props.len() {
            return Err(parse_error(path, n + 1, "wrong number of vertex properties"));
        }
        let coord = |a: usize| parse_f64(path, n + 1, tokens[cols[a]]);
        points.push(Point::new(coord(0)?, coord(1)?, coord(2)?));
    }
    let mut faces = Vec::with_capacity(header.face_count);
    for _ in 0..header.face_count {
        let (n, line) = body
            .next()
            .ok_or_else(|| format_error(path, "fewer face lines than declared"))?;
        let idx: Vec<usize> = line
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| parse_error(path, n + 1, format!("invalid index `{t}`"))))
            .collect::<Result<_>>()?;
        let Some((&count, rest)) = idx.split_first() else {
            return Err(parse_error(path, n + 1, "empty face"));
        };
        if rest.len() != count {
            return Err(parse_error(path, n + 1, "face index count mismatch"));
        }
        push_polygon(path, n + 1, rest, fan, &mut faces)?;
    }
    if let Some((n, _)) = body.next() {
        return Err(parse_error(path, n + 1, "unexpected data after declared elements"));
    }
    Ok((points, faces))
}

fn push_polygon(path: &Path, line: usize, poly: &[usize], fan: bool, faces: &mut Faces) -> Result<()> {
    match poly.len() {
        3 => faces.push([poly[0], poly[1], poly[2]]),
        n if n > 3 && fan => {
            for w in 1..n - 1 {
                faces.push([poly[0], poly[w], poly[w + 1]]);
            }
        }
        n if n > 3 => {
            return Err(parse_error(path, line, format!("triangles only (face has {n} vertices)")))
        }
        _ => return Err(parse_error(path, line, "face with fewer than 3 vertices")),
    }
    Ok(())
}

fn fmt_coord(v: f64) -> String {
    format!("{}", v as f32)
}

/// Writes coordinates rounded to `f32`, in their shortest exact decimal form.
pub fn write_pointcloud(path: impl AsRef<Path>, cloud: &PointCloud, format: PointFormat) -> Result<()> {
    let mut out = String::new();
    if format == PointFormat::Ply {
        let _ = write!(
            out,
            "ply\nformat ascii 1.0\nelement vertex {}\nproperty float x\nproperty float y\nproperty float z\nend_header\n",
            cloud.len()
        );
    }
    for p in cloud.points() {
        let _ = writeln!(out, "{} {} {}", fmt_coord(p.x), fmt_coord(p.y), fmt_coord(p.z));
    }
    write_bytes(path.as_ref(), out.as_bytes())
}

/// Reads a triangle mesh from OBJ or ASCII PLY. Polygons with more than three
/// vertices are rejected unless `fan_triangulate` is set.
pub fn read_mesh(path: impl AsRef<Path>, fan_triangulate: bool) -> Result<TriangleMesh> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let is_ply = PointFormat::from_path(path) == PointFormat::Ply;
    let (vertices, faces) = if is_ply {
        parse_ply(path, &text, fan_triangulate)?
    } else {
        parse_obj(path, &text, fan_triangulate)?
    };
    TriangleMesh::new(vertices, faces).map_err(|e| match e {
        Error::InvalidArgument(msg) => format_error(path, msg),
        other => other,
    })
}

fn parse_obj(path: &Path, text: &str, fan: bool) -> Result<(Vec<Point>, Faces)> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let c: Vec<f64> = tokens
                    .take(3)
                    .map(|t| parse_f64(path, n + 1, t))
                    .collect::<Result<_>>()?;
                if c.len() != 3 {
                    return Err(parse_error(path, n + 1, "vertex needs 3 coordinates"));
                }
                vertices.push(Point::new(c[0], c[1], c[2]));
            }
            Some("f") => {
                let poly: Vec<usize> = tokens
                    .map(|t| obj_index(path, n + 1, t, vertices.len()))
                    .collect::<Result<_>>()?;
                push_polygon(path, n + 1, &poly, fan, &mut faces)?;
            }
            _ => {}
        }
    }
    Ok((vertices, faces))
}

/// Resolves a 1-based (or negative, relative) OBJ vertex reference.
fn obj_index(path: &Path, line: usize, token: &str, seen: usize) -> Result<usize> {
    let head = token.split('/').next().unwrap_or("");
    let i: i64 = head
        .parse()
        .map_err(|_| parse_error(path, line, format!("invalid face index `{token}`")))?;
    let resolved = if i > 0 { i - 1 } else { seen as i64 + i };
    if i == 0 || resolved < 0 || resolved >= seen as i64 {
        return Err(parse_error(path, line, format!("face index `{token}` out of range")));
    }
    Ok(resolved as usize)
}

pub fn write_obj(path: impl AsRef<Path>, mesh: &TriangleMesh) -> Result<()> {
    let mut out = String::new();
    for v in mesh.vertices() {
        let _ = writeln!(out, "v {} {} {}", v.x, v.y, v.z);
    }
    for f in mesh.faces() {
        let _ = writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    write_bytes(path.as_ref(), out.as_bytes())
}

pub fn write_density_grid(path: impl AsRef<Path>, field: &DensityField) -> Result<()> {
    let cells = field.grid().cell_count();
    let mut bytes = Vec::with_capacity(12 + 8 * cells);
    bytes.extend_from_slice(GRID_MAGIC);
    bytes.extend_from_slice(&GRID_VERSION.to_le_bytes());
    bytes.extend_from_slice(&(field.grid().resolution() as u32).to_le_bytes());
    for v in field.density().iter().chain(field.occupancy_logit()) {
        bytes.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    write_bytes(path.as_ref(), &bytes)
}

pub fn read_density_grid(path: impl AsRef<Path>) -> Result<DensityField> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let word = |at: usize| -> Result<u32> {
        bytes
            .get(at..at + 4)
            .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
            .ok_or_else(|| format_error(path, "truncated header"))
    };
    if bytes.get(..4) != Some(GRID_MAGIC.as_slice()) {
        return Err(format_error(path, "not a density grid (bad magic)"));
    }
    let version = word(4)?;
    if version != GRID_VERSION {
        return Err(format_error(path, format!("unsupported density grid version {version}")));
    }
    let grid = VoxelGrid::new(word(8)? as usize).map_err(|e| format_error(path, e.to_string()))?;
    let cells = grid.cell_count();
    let body = &bytes[12..];
    if body.len() != 8 * cells {
        return Err(format_error(
            path,
            format!("expected {} payload bytes, found {}", 8 * cells, body.len()),
        ));
    }
    let values: Vec<f64> = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    let (density, logits) = values.split_at(cells);
    DensityField::new(grid, density.to_vec(), logits.to_vec(), Provenance::ExternalFile)
        .map_err(|e| format_error(path, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp() -> tempfile::TempDir {
        tempfile::tempdir().unwrap()
    }

    #[test]
    fn xyz_round_trip_is_f32_exact() {
        let dir = tmp();
        let path = dir.path().join("a.xyz");
        let cloud = PointCloud::from_xyz(&[[0.1, -2.5e-7, 3.0], [1.0 / 3.0, 7.0, -0.0]]).unwrap();
        write_pointcloud(&path, &cloud, PointFormat::Xyz).unwrap();
        let back = read_pointcloud(&path).unwrap();
        for (a, b) in cloud.points().iter().zip(back.points()) {
            for k in 0..3 {
                assert_eq!((a[k] as f32).to_bits(), (b[k] as f32).to_bits());
            }
        }
        let again = dir.path().join("b.xyz");
        write_pointcloud(&again, &back, PointFormat::Xyz).unwrap();
        assert_eq!(fs::read(&path).unwrap(), fs::read(&again).unwrap());
    }

    #[test]
    fn xyz_comments_and_errors() {
        let dir = tmp();
        let path = dir.path().join("c.xyz");
        fs::write(&path, "# header\n1 2 3 0.5\n\n  # more\n4,5,6\n").unwrap();
        let c = read_pointcloud(&path).unwrap();
        assert_eq!(c.points(), &[Point::new(1.0, 2.0, 3.0), Point::new(4.0, 5.0, 6.0)]);

        fs::write(&path, "1 2 3\n1 2\n").unwrap();
        match read_pointcloud(&path) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        fs::write(&path, "1 2 3\n4 x 6\n").unwrap();
        assert!(matches!(read_pointcloud(&path), Err(Error::Parse { line: 2, .. })));
        fs::write(&path, "").unwrap();
        assert!(read_pointcloud(&path).is_err());
        fs::write(&path, "# only a comment\n").unwrap();
        assert!(read_pointcloud(&path).is_err());
    }

    #[test]
    fn ply_points_round_trip() {
        let dir = tmp();
        let path = dir.path().join("p.ply");
        let cloud = PointCloud::from_xyz(&[[0.25, 0.5, -1.0], [3.0, 2.0, 1.0]]).unwrap();
        write_pointcloud(&path, &cloud, PointFormat::Ply).unwrap();
        assert_eq!(read_pointcloud(&path).unwrap(), cloud);
    }

    #[test]
    fn ply_with_extra_properties_and_faces() {
        let dir = tmp();
        let path = dir.path().join("m.ply");
        fs::write(
            &path,
            "ply\nformat ascii 1.0\ncomment x\nelement vertex 4\nproperty float nx\nproperty float x\n\
             property float y\nproperty float z\nelement face 1\nproperty list uchar int vertex_indices\n\
             end_header\n9 0 0 0\n9 1 0 0\n9 1 1 0\n9 0 1 0\n4 0 1 2 3\n",
        )
        .unwrap();
        let err = read_mesh(&path, false).unwrap_err();
        assert!(err.to_string().contains("triangles only"));
        let mesh = read_mesh(&path, true).unwrap();
        assert_eq!(mesh.faces(), &[[0, 1, 2], [0, 2, 3]]);
        assert_eq!(read_pointcloud(&path).unwrap().len(), 4);
    }

    #[test]
    fn obj_round_trip_and_quads() {
        let dir = tmp();
        let path = dir.path().join("t.obj");
        let mesh = TriangleMesh::new(
            vec![Point::new(0.0, 0.0, 0.0), Point::new(1.0, 0.0, 0.0), Point::new(0.0, 1.0, 0.5)],
            vec![[0, 1, 2]],
        )
        .unwrap();
        write_obj(&path, &mesh).unwrap();
        assert_eq!(read_mesh(&path, false).unwrap(), mesh);

        fs::write(&path, "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1/1 2/2 3/3 4/4\n").unwrap();
        match read_mesh(&path, false) {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 5);
                assert!(message.contains("triangles only"));
            }
            other => panic!("{other:?}"),
        }
        fs::write(&path, "v 0 0 0\nv 1 0 0\nv 1 1 0\nf -3 -2 -1\n").unwrap();
        assert_eq!(read_mesh(&path, false).unwrap().faces(), &[[0, 1, 2]]);
        fs::write(&path, "v 0 0 0\nf 1 2 3\n").unwrap();
        assert!(matches!(read_mesh(&path, false), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn density_grid_round_trip_is_bit_exact() {
        let dir = tmp();
        let path = dir.path().join("g.bin");
        let grid = VoxelGrid::new(3).unwrap();
        let density: Vec<f64> = (0..27).map(|i| (i as f32 / 351.0) as f64).collect();
        let logits: Vec<f64> = (0..27).map(|i| (i as f32 - 13.5) as f64).collect();
        let field = DensityField::new(grid, density, logits, Provenance::ExternalFile).unwrap();
        write_density_grid(&path, &field).unwrap();
        let back = read_density_grid(&path).unwrap();
        assert_eq!(back, field);
        let bytes = fs::read(&path).unwrap();
        assert_eq!(&bytes[..4], b"PUVX");
        assert_eq!(bytes.len(), 12 + 8 * 27);

        fs::write(&path, &bytes[..100]).unwrap();
        assert!(matches!(read_density_grid(&path), Err(Error::Format { .. })));
    }
}
