//! Point cloud files: whitespace-separated XYZ text and PLY (ASCII or binary
//! little-endian).

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use tcm_icp_core::{Point3, PointCloud};

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}:{line}: {msg}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("{}: {msg}", path.display())]
    Format { path: PathBuf, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloudFormat {
    Xyz,
    PlyAscii,
    PlyBinary,
}

impl CloudFormat {
    /// `.ply` writes binary PLY, anything else XYZ text.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("ply") => CloudFormat::PlyBinary,
            _ => CloudFormat::Xyz,
        }
    }
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> IoError {
    IoError::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn format_err(path: &Path, msg: impl Into<String>) -> IoError {
    IoError::Format {
        path: path.to_path_buf(),
        msg: msg.into(),
    }
}

/// Reads a cloud, detecting PLY by its magic line. The cloud id is the path.
pub fn read_cloud(path: &Path) -> Result<PointCloud, IoError> {
    let bytes = fs::read(path).map_err(|source| IoError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let points = if bytes.starts_with(b"ply\n") || bytes.starts_with(b"ply\r\n") {
        read_ply(path, &bytes)?
    } else {
        let text = std::str::from_utf8(&bytes)
            .map_err(|e| format_err(path, format!("not UTF-8 text: {e}")))?;
        read_xyz(path, text)?
    };
    if points.is_empty() {
        return Err(format_err(path, "no points"));
    }
    PointCloud::new(path.display().to_string(), points).map_err(|e| format_err(path, e.to_string()))
}

fn read_xyz(path: &Path, text: &str) -> Result<Vec<Point3>, IoError> {
    let mut points = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() < 3 {
            return Err(parse_err(
                path,
                i + 1,
                format!("expected `x y z`, got `{line}`"),
            ));
        }
        let mut xyz = [0.0; 3];
        for (v, f) in xyz.iter_mut().zip(&fields) {
            *v = f
                .parse()
                .map_err(|_| parse_err(path, i + 1, format!("`{f}` is not a number")))?;
        }
        points.push(Point3::new(xyz[0], xyz[1], xyz[2]));
    }
    Ok(points)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn read_le(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::U32 => u32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F32 => f32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug)]
enum Property {
    Scalar(String, Scalar),
    List { count: Scalar, item: Scalar },
}

#[derive(Debug)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

#[derive(Debug, PartialEq)]
enum Encoding {
    Ascii,
    BinaryLe,
}

struct Header {
    encoding: Encoding,
    elements: Vec<Element>,
    /// Byte offset of the body.
    body: usize,
    /// Line number of `end_header`.
    lines: usize,
}

fn parse_header(path: &Path, bytes: &[u8]) -> Result<Header, IoError> {
    let mut encoding = None;
    let mut elements: Vec<Element> = Vec::new();
    let mut offset = 0;
    let mut line_no = 0;
    loop {
        let Some(len) = bytes[offset..].iter().position(|&b| b == b'\n') else {
            return Err(format_err(path, "header has no `end_header`"));
        };
        line_no += 1;
        let line = std::str::from_utf8(&bytes[offset..offset + len])
            .map_err(|_| parse_err(path, line_no, "header is not text"))?
            .trim();
        offset += len + 1;
        let words: Vec<&str> = line.split_whitespace().collect();
        match words.as_slice() {
            ["ply"] if line_no == 1 => {}
            ["format", "ascii", _] => encoding = Some(Encoding::Ascii),
            ["format", "binary_little_endian", _] => encoding = Some(Encoding::BinaryLe),
            ["format", other, _] => {
                return Err(parse_err(
                    path,
                    line_no,
                    format!("unsupported PLY format `{other}`"),
                ))
            }
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", name, count] => {
                let count = count.parse().map_err(|_| {
                    parse_err(path, line_no, format!("bad element count `{count}`"))
                })?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    props: Vec::new(),
                });
            }
            ["property", "list", count, item, _] => {
                let (Some(count), Some(item)) = (Scalar::parse(count), Scalar::parse(item)) else {
                    return Err(parse_err(path, line_no, "unknown list property type"));
                };
                let Some(e) = elements.last_mut() else {
                    return Err(parse_err(path, line_no, "property before any element"));
                };
                e.props.push(Property::List { count, item });
            }
            ["property", ty, name] => {
                let Some(ty) = Scalar::parse(ty) else {
                    return Err(parse_err(
                        path,
                        line_no,
                        format!("unknown property type `{ty}`"),
                    ));
                };
                let Some(e) = elements.last_mut() else {
                    return Err(parse_err(path, line_no, "property before any element"));
                };
                e.props.push(Property::Scalar(name.to_string(), ty));
            }
            ["end_header"] => break,
            _ => {
                return Err(parse_err(
                    path,
                    line_no,
                    format!("unexpected header line `{line}`"),
                ))
            }
        }
    }
    let encoding = encoding.ok_or_else(|| format_err(path, "header has no `format` line"))?;
    Ok(Header {
        encoding,
        elements,
        body: offset,
        lines: line_no,
    })
}

/// Positions of x, y and z among the vertex properties.
fn xyz_columns(path: &Path, vertex: &Element) -> Result<[usize; 3], IoError> {
    let mut cols = [usize::MAX; 3];
    for (i, p) in vertex.props.iter().enumerate() {
        if let Property::Scalar(name, ty) = p {
            let axis = match name.as_str() {
                "x" => 0,
                "y" => 1,
                "z" => 2,
                _ => continue,
            };
            if !matches!(ty, Scalar::F32 | Scalar::F64) {
                return Err(format_err(
                    path,
                    format!("vertex property `{name}` must be float or double"),
                ));
            }
            cols[axis] = i;
        }
    }
    if cols.contains(&usize::MAX) {
        return Err(format_err(path, "vertex element lacks x, y or z"));
    }
    Ok(cols)
}

fn read_ply(path: &Path, bytes: &[u8]) -> Result<Vec<Point3>, IoError> {
    let header = parse_header(path, bytes)?;
    let Some(vi) = header.elements.iter().position(|e| e.name == "vertex") else {
        return Err(format_err(path, "no vertex element"));
    };
    let cols = xyz_columns(path, &header.elements[vi])?;
    match header.encoding {
        Encoding::Ascii => read_ply_ascii(path, &bytes[header.body..], &header, vi, cols),
        Encoding::BinaryLe => read_ply_binary(path, &bytes[header.body..], &header, vi, cols),
    }
}

fn read_ply_ascii(
    path: &Path,
    body: &[u8],
    header: &Header,
    vi: usize,
    cols: [usize; 3],
) -> Result<Vec<Point3>, IoError> {
    let text = std::str::from_utf8(body).map_err(|_| format_err(path, "ASCII body is not text"))?;
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (header.lines + i + 1, l));
    let mut points = Vec::new();
    for (ei, e) in header.elements.iter().enumerate().take(vi + 1) {
        for _ in 0..e.count {
            let Some((line_no, line)) = lines.next() else {
                return Err(format_err(
                    path,
                    format!("file ends inside element `{}`", e.name),
                ));
            };
            if ei != vi {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let mut xyz = [0.0; 3];
            for (axis, &c) in cols.iter().enumerate() {
                let f = fields
                    .get(c)
                    .ok_or_else(|| parse_err(path, line_no, "too few vertex values"))?;
                xyz[axis] = f
                    .parse()
                    .map_err(|_| parse_err(path, line_no, format!("`{f}` is not a number")))?;
            }
            points.push(Point3::new(xyz[0], xyz[1], xyz[2]));
        }
    }
    Ok(points)
}

fn read_ply_binary(
    path: &Path,
    body: &[u8],
    header: &Header,
    vi: usize,
    cols: [usize; 3],
) -> Result<Vec<Point3>, IoError> {
    let truncated = || format_err(path, "binary body is truncated");
    let mut at = 0;
    let mut points = Vec::new();
    for (ei, e) in header.elements.iter().enumerate().take(vi + 1) {
        for _ in 0..e.count {
            let mut xyz = [0.0; 3];
            for (pi, p) in e.props.iter().enumerate() {
                match p {
                    Property::Scalar(_, ty) => {
                        let b = body.get(at..at + ty.size()).ok_or_else(truncated)?;
                        if ei == vi {
                            if let Some(axis) = cols.iter().position(|&c| c == pi) {
                                xyz[axis] = ty.read_le(b);
                            }
                        }
                        at += ty.size();
                    }
                    Property::List { count, item } => {
                        let b = body.get(at..at + count.size()).ok_or_else(truncated)?;
                        let n = count.read_le(b);
                        if n.is_nan() || n < 0.0 {
                            return Err(format_err(path, "negative list length"));
                        }
                        at += count.size() + n as usize * item.size();
                    }
                }
            }
            if ei == vi {
                points.push(Point3::new(xyz[0], xyz[1], xyz[2]));
            }
        }
    }
    if at > body.len() {
        return Err(truncated());
    }
    Ok(points)
}

/// Writes `contents` to a temporary file next to `path` and renames it into
/// place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), IoError> {
    let io = |source| IoError::Io {
        path: path.to_path_buf(),
        source,
    };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(contents).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

/// Serializes a cloud. XYZ values use the shortest representation that
/// parses back to the same `f64`.
pub fn encode_cloud(cloud: &PointCloud, format: CloudFormat) -> Vec<u8> {
    let n = cloud.len();
    match format {
        CloudFormat::Xyz => {
            let mut s = String::with_capacity(n * 48);
            for p in cloud.points() {
                s.push_str(&format!("{} {} {}\n", p.x, p.y, p.z));
            }
            s.into_bytes()
        }
        CloudFormat::PlyAscii | CloudFormat::PlyBinary => {
            let enc = if format == CloudFormat::PlyAscii {
                "ascii"
            } else {
                "binary_little_endian"
            };
            let mut out = format!(
                "ply\nformat {enc} 1.0\nelement vertex {n}\nproperty double x\nproperty double y\nproperty double z\nend_header\n"
            )
            .into_bytes();
            for p in cloud.points() {
                if format == CloudFormat::PlyAscii {
                    out.extend_from_slice(format!("{} {} {}\n", p.x, p.y, p.z).as_bytes());
                } else {
                    for v in [p.x, p.y, p.z] {
                        out.extend_from_slice(&v.to_le_bytes());
                    }
                }
            }
            out
        }
    }
}

pub fn write_cloud(cloud: &PointCloud, path: &Path, format: CloudFormat) -> Result<(), IoError> {
    write_atomic(path, &encode_cloud(cloud, format))
}
