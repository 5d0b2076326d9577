//! ASCII OFF and PLY reading and writing with per-face colors.
//!
//! Integer colors are read as 0-255 and divided by 255; float colors are
//! taken as given. Per-vertex colors are averaged onto faces.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{FaceImage, MeshError, MeshOptions, SurfaceMesh};
use crate::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Off,
    Ply,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "off" => Some(MeshFormat::Off),
            "ply" => Some(MeshFormat::Ply),
            _ => None,
        }
    }
}

/// Raw parse result before validation.
#[derive(Debug, Clone, Default)]
pub struct RawMesh {
    pub vertices: Vec<Vec3>,
    pub faces: Vec<[usize; 3]>,
    pub face_colors: Option<(usize, Vec<f64>)>,
    pub vertex_colors: Option<(usize, Vec<f64>)>,
}

impl RawMesh {
    /// Resolves colors into a face image. Face colors win over vertex colors.
    pub fn image(&self, default_channels: usize) -> Result<FaceImage, MeshError> {
        if let Some((ch, vals)) = &self.face_colors {
            return FaceImage::new(*ch, vals.clone());
        }
        if let Some((ch, vals)) = &self.vertex_colors {
            let mut out = Vec::with_capacity(self.faces.len() * ch);
            for tri in &self.faces {
                for c in 0..*ch {
                    out.push(tri.iter().map(|&v| vals[v * ch + c]).sum::<f64>() / 3.0);
                }
            }
            return FaceImage::new(*ch, out);
        }
        Ok(FaceImage::constant(default_channels, self.faces.len(), 0.0))
    }
}

pub fn load_mesh(
    path: &Path,
    format: Option<MeshFormat>,
    default_channels: usize,
    opts: MeshOptions,
) -> Result<(SurfaceMesh, FaceImage), MeshError> {
    let format = format
        .or_else(|| MeshFormat::from_path(path))
        .ok_or_else(|| MeshError::Invalid(format!("cannot infer mesh format of {}", path.display())))?;
    let text = fs::read_to_string(path)?;
    let raw = match format {
        MeshFormat::Off => parse_off(&text)?,
        MeshFormat::Ply => parse_ply(&text)?,
    };
    let image = raw.image(default_channels)?;
    let mesh = SurfaceMesh::new(raw.vertices, raw.faces, opts)?;
    Ok((mesh, image))
}

pub fn save_mesh(
    path: &Path,
    format: Option<MeshFormat>,
    mesh: &SurfaceMesh,
    image: Option<&FaceImage>,
) -> Result<(), MeshError> {
    let format = format.or_else(|| MeshFormat::from_path(path)).unwrap_or(MeshFormat::Ply);
    if let Some(img) = image {
        img.check_mesh(mesh)?;
    }
    let text = match format {
        MeshFormat::Off => write_off(mesh, image),
        MeshFormat::Ply => write_ply(mesh, image),
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text)?;
    Ok(())
}

fn perr(line: usize, msg: impl Into<String>) -> MeshError {
    MeshError::Parse { line, msg: msg.into() }
}

/// Content lines with their 1-based line numbers; comments stripped.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty())
}

fn num<T: std::str::FromStr>(tok: &str, line: usize) -> Result<T, MeshError> {
    tok.parse().map_err(|_| perr(line, format!("invalid number `{tok}`")))
}

fn color_value(tok: &str, line: usize) -> Result<f64, MeshError> {
    if tok.contains(['.', 'e', 'E']) {
        num::<f64>(tok, line)
    } else {
        Ok(num::<i64>(tok, line)? as f64 / 255.0)
    }
}

fn push_colors(
    slot: &mut Option<(usize, Vec<f64>)>,
    toks: &[&str],
    line: usize,
    count: usize,
) -> Result<(), MeshError> {
    let ch = match toks.len() {
        0 => {
            if slot.is_some() {
                return Err(perr(line, "missing color"));
            }
            return Ok(());
        }
        1 => 1,
        3 | 4 => 3,
        n => return Err(perr(line, format!("unexpected {n} trailing values"))),
    };
    let entry = slot.get_or_insert_with(|| (ch, Vec::new()));
    if entry.0 != ch || entry.1.len() != count * ch {
        return Err(perr(line, "inconsistent color columns"));
    }
    for t in &toks[..ch] {
        entry.1.push(color_value(t, line)?);
    }
    Ok(())
}

pub fn parse_off(text: &str) -> Result<RawMesh, MeshError> {
    let mut lines = content_lines(text);
    let (l0, header) = lines.next().ok_or_else(|| perr(1, "empty file"))?;
    let mut toks: Vec<&str> = header.split_whitespace().collect();
    if !toks[0].ends_with("OFF") {
        return Err(perr(l0, "missing OFF header"));
    }
    toks.remove(0);
    let counts: Vec<&str> = if toks.is_empty() {
        let (_, c) = lines.next().ok_or_else(|| perr(l0, "missing counts"))?;
        c.split_whitespace().collect()
    } else {
        toks
    };
    if counts.len() < 2 {
        return Err(perr(l0, "expected vertex and face counts"));
    }
    let nv: usize = num(counts[0], l0)?;
    let nf: usize = num(counts[1], l0)?;
    let mut raw = RawMesh::default();
    for i in 0..nv {
        let (l, s) = lines.next().ok_or_else(|| perr(0, format!("expected {nv} vertices, got {i}")))?;
        let t: Vec<&str> = s.split_whitespace().collect();
        if t.len() < 3 {
            return Err(perr(l, "vertex needs 3 coordinates"));
        }
        raw.vertices.push(Vec3::new(num(t[0], l)?, num(t[1], l)?, num(t[2], l)?));
        push_colors(&mut raw.vertex_colors, &t[3..], l, i)?;
    }
    for i in 0..nf {
        let (l, s) = lines.next().ok_or_else(|| perr(0, format!("expected {nf} faces, got {i}")))?;
        let t: Vec<&str> = s.split_whitespace().collect();
        let k: usize = num(t[0], l)?;
        if k != 3 {
            return Err(perr(l, format!("only triangles are supported, got a {k}-gon")));
        }
        if t.len() < 4 {
            return Err(perr(l, "face row too short"));
        }
        raw.faces.push([num(t[1], l)?, num(t[2], l)?, num(t[3], l)?]);
        push_colors(&mut raw.face_colors, &t[4..], l, i)?;
    }
    Ok(raw)
}

#[derive(Debug)]
struct PlyElement {
    name: String,
    count: usize,
    /// (name, is_list, is_float)
    props: Vec<(String, bool, bool)>,
}

fn is_float_type(t: &str) -> bool {
    matches!(t, "float" | "float32" | "double" | "float64")
}

pub fn parse_ply(text: &str) -> Result<RawMesh, MeshError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    match lines.next() {
        Some((_, "ply")) => {}
        _ => return Err(perr(1, "missing ply magic")),
    }
    let mut elements: Vec<PlyElement> = Vec::new();
    loop {
        let (l, s) = lines.next().ok_or_else(|| perr(0, "unterminated header"))?;
        let t: Vec<&str> = s.split_whitespace().collect();
        match t.first().copied() {
            Some("format") => {
                if t.get(1) != Some(&"ascii") {
                    return Err(perr(l, "only ascii PLY is supported"));
                }
            }
            Some("comment") | Some("obj_info") | None => {}
            Some("element") => {
                if t.len() != 3 {
                    return Err(perr(l, "malformed element line"));
                }
                elements.push(PlyElement { name: t[1].to_string(), count: num(t[2], l)?, props: Vec::new() });
            }
            Some("property") => {
                let el = elements.last_mut().ok_or_else(|| perr(l, "property before element"))?;
                if t.get(1) == Some(&"list") {
                    if t.len() != 5 {
                        return Err(perr(l, "malformed list property"));
                    }
                    el.props.push((t[4].to_string(), true, false));
                } else {
                    if t.len() != 3 {
                        return Err(perr(l, "malformed property"));
                    }
                    el.props.push((t[2].to_string(), false, is_float_type(t[1])));
                }
            }
            Some("end_header") => break,
            Some(other) => return Err(perr(l, format!("unknown header keyword `{other}`"))),
        }
    }

    let mut raw = RawMesh::default();
    let mut body = lines.filter(|(_, s)| !s.is_empty());
    for el in &elements {
        for _ in 0..el.count {
            let (l, s) = body.next().ok_or_else(|| perr(0, format!("missing {} rows", el.name)))?;
            let toks: Vec<&str> = s.split_whitespace().collect();
            let mut pos = 0;
            let mut xyz = [0.0f64; 3];
            let mut rgb: Vec<f64> = Vec::new();
            let mut idx: Option<Vec<usize>> = None;
            for (name, is_list, is_float) in &el.props {
                if *is_list {
                    let n: usize = num(toks.get(pos).ok_or_else(|| perr(l, "row too short"))?, l)?;
                    let vals = toks.get(pos + 1..pos + 1 + n).ok_or_else(|| perr(l, "row too short"))?;
                    if name == "vertex_indices" || name == "vertex_index" {
                        idx = Some(vals.iter().map(|v| num(v, l)).collect::<Result<_, _>>()?);
                    }
                    pos += 1 + n;
                    continue;
                }
                let tok = *toks.get(pos).ok_or_else(|| perr(l, "row too short"))?;
                pos += 1;
                match name.as_str() {
                    "x" => xyz[0] = num(tok, l)?,
                    "y" => xyz[1] = num(tok, l)?,
                    "z" => xyz[2] = num(tok, l)?,
                    "red" | "green" | "blue" => {
                        let v: f64 = num(tok, l)?;
                        rgb.push(if *is_float { v } else { v / 255.0 });
                    }
                    _ => {}
                }
            }
            match el.name.as_str() {
                "vertex" => {
                    raw.vertices.push(Vec3::new(xyz[0], xyz[1], xyz[2]));
                    if rgb.len() == 3 {
                        raw.vertex_colors.get_or_insert_with(|| (3, Vec::new())).1.extend(rgb);
                    }
                }
                "face" => {
                    let idx = idx.ok_or_else(|| perr(l, "face without vertex_indices"))?;
                    if idx.len() != 3 {
                        return Err(perr(l, format!("only triangles are supported, got a {}-gon", idx.len())));
                    }
                    raw.faces.push([idx[0], idx[1], idx[2]]);
                    if rgb.len() == 3 {
                        raw.face_colors.get_or_insert_with(|| (3, Vec::new())).1.extend(rgb);
                    }
                }
                _ => {}
            }
        }
    }
    Ok(raw)
}

fn to_byte(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn rgb_bytes(image: &FaceImage, f: usize) -> [u8; 3] {
    let v = image.value(f);
    if v.len() == 1 {
        [to_byte(v[0]); 3]
    } else {
        [to_byte(v[0]), to_byte(v[1]), to_byte(v[2])]
    }
}

pub fn write_off(mesh: &SurfaceMesh, image: Option<&FaceImage>) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "OFF\n{} {} 0", mesh.num_vertices(), mesh.num_faces());
    for v in mesh.vertices() {
        let _ = writeln!(s, "{:?} {:?} {:?}", v.x, v.y, v.z);
    }
    for (f, t) in mesh.faces().iter().enumerate() {
        let _ = write!(s, "3 {} {} {}", t[0], t[1], t[2]);
        if let Some(img) = image {
            if img.channels() == 1 {
                let _ = write!(s, " {}", to_byte(img.value(f)[0]));
            } else {
                let c = rgb_bytes(img, f);
                let _ = write!(s, " {} {} {}", c[0], c[1], c[2]);
            }
        }
        s.push('\n');
    }
    s
}

pub fn write_ply(mesh: &SurfaceMesh, image: Option<&FaceImage>) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "ply\nformat ascii 1.0");
    let _ =
        writeln!(s, "element vertex {}\nproperty double x\nproperty double y\nproperty double z", mesh.num_vertices());
    let _ = writeln!(s, "element face {}\nproperty list uchar int vertex_indices", mesh.num_faces());
    if image.is_some() {
        let _ = writeln!(s, "property uchar red\nproperty uchar green\nproperty uchar blue");
    }
    let _ = writeln!(s, "end_header");
    for v in mesh.vertices() {
        let _ = writeln!(s, "{:?} {:?} {:?}", v.x, v.y, v.z);
    }
    for (f, t) in mesh.faces().iter().enumerate() {
        let _ = write!(s, "3 {} {} {}", t[0], t[1], t[2]);
        if let Some(img) = image {
            let c = rgb_bytes(img, f);
            let _ = write!(s, " {} {} {}", c[0], c[1], c[2]);
        }
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    const TETRA: &str = "OFF\n4 4 0\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n3 0 2 1 0\n3 0 1 3 0\n3 0 3 2 0\n3 1 2 3 255\n";

    #[test]
    fn off_tetrahedron_gray() {
        let raw = parse_off(TETRA).unwrap();
        let img = raw.image(1).unwrap();
        assert_eq!(img.raw(), &[0.0, 0.0, 0.0, 1.0]);
        let m = SurfaceMesh::new(raw.vertices, raw.faces, MeshOptions::default()).unwrap();
        assert_eq!(m.num_faces(), 4);
        assert!(m.is_closed());
    }

    #[test]
    fn ply_out_of_range_index() {
        let ply = "ply\nformat ascii 1.0\nelement vertex 4\nproperty float x\nproperty float y\nproperty float z\n\
                   element face 1\nproperty list uchar int vertex_indices\nend_header\n\
                   0 0 0\n1 0 0\n0 1 0\n0 0 1\n3 0 1 10\n";
        let raw = parse_ply(ply).unwrap();
        let err = SurfaceMesh::new(raw.vertices, raw.faces, MeshOptions { allow_open: true }).unwrap_err();
        assert!(matches!(err, MeshError::IndexOutOfRange { index: 10, .. }));
    }

    #[test]
    fn ply_round_trip_keeps_colors() {
        let raw = parse_off(TETRA).unwrap();
        let img = raw.image(1).unwrap().to_rgb();
        let m = SurfaceMesh::new(raw.vertices, raw.faces, MeshOptions::default()).unwrap();
        let text = write_ply(&m, Some(&img));
        let back = parse_ply(&text).unwrap();
        assert_eq!(back.image(3).unwrap(), img);
        assert_eq!(back.vertices, m.vertices());
    }

    #[test]
    fn vertex_colors_average_onto_faces() {
        let ply = "ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\nproperty float z\n\
                   property uchar red\nproperty uchar green\nproperty uchar blue\n\
                   element face 1\nproperty list uchar int vertex_indices\nend_header\n\
                   0 0 0 255 0 0\n1 0 0 0 255 0\n0 1 0 0 0 255\n3 0 1 2\n";
        let img = parse_ply(ply).unwrap().image(1).unwrap();
        for c in img.value(0) {
            assert!((c - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn open_boundary_is_reported() {
        let off = "OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n";
        let raw = parse_off(off).unwrap();
        let err = SurfaceMesh::new(raw.vertices, raw.faces, MeshOptions::default()).unwrap_err();
        assert!(err.to_string().contains("boundary edge"));
    }

    #[test]
    fn malformed_off() {
        assert!(matches!(parse_off("OFF\n3 1 0\n0 0\n"), Err(MeshError::Parse { .. })));
    }
}
