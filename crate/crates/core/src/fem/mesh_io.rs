use std::fmt::Write as _;
use std::path::Path;

use super::element::ElementType;
use super::mesh::Mesh;
use crate::error::{Error, Result};
use crate::phase_space::header_pairs;

const MAGIC: &str = "# dd-mesh v1";

fn err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

enum Block {
    None,
    Nodes(usize),
    Elements(usize),
    NodeSet(String, Option<usize>),
    FaceSet(String, Option<usize>),
}

/// Parses mesh text. `path` only labels error messages.
pub fn parse_mesh(text: &str, path: &Path) -> Result<Mesh> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    match lines.next() {
        Some((_, l)) if l == MAGIC => {}
        Some((n, l)) => return Err(err(path, n, format!("expected '{MAGIC}', found '{l}'"))),
        None => return Err(err(path, 1, "empty file")),
    }
    let (hline, header) = lines.next().ok_or_else(|| err(path, 2, "missing header line"))?;
    let mut dim = None;
    let mut etype = None;
    let mut section = 1.0;
    for (k, v) in header_pairs(header) {
        match k {
            "dim" => dim = Some(v.parse::<usize>().map_err(|_| err(path, hline, format!("invalid dim '{v}'")))?),
            "etype" => etype = Some(v.parse::<ElementType>().map_err(|e| err(path, hline, e.to_string()))?),
            "section" => {
                section = v.parse::<f64>().map_err(|_| err(path, hline, format!("invalid section '{v}'")))?
            }
            _ => {}
        }
    }
    let etype = etype.ok_or_else(|| err(path, hline, "header lacks etype="))?;
    let dim = dim.unwrap_or(etype.dim());
    if dim != etype.dim() {
        return Err(err(path, hline, format!("dim={dim} does not match {etype}")));
    }

    let mut nodes: Vec<Vec<f64>> = Vec::new();
    let mut elements: Vec<Vec<usize>> = Vec::new();
    let mut nodesets: Vec<(String, Vec<usize>, usize)> = Vec::new();
    let mut facesets: Vec<(String, Vec<(usize, usize)>, usize)> = Vec::new();
    let mut block = Block::None;
    let mut block_line = hline;

    let close = |block: &Block, nodes: &Vec<Vec<f64>>, elements: &Vec<Vec<usize>>, nodesets: &Vec<(String, Vec<usize>, usize)>, facesets: &Vec<(String, Vec<(usize, usize)>, usize)>, at: usize| -> Result<()> {
        match block {
            Block::Nodes(n) if nodes.len() != *n => Err(err(path, at, format!("expected {n} nodes, found {}", nodes.len()))),
            Block::Elements(m) if elements.len() != *m => {
                Err(err(path, at, format!("expected {m} elements, found {}", elements.len())))
            }
            Block::NodeSet(name, Some(k)) if nodesets.last().map(|s| s.1.len()) != Some(*k) => {
                Err(err(path, at, format!("nodeset '{name}' declares {k} entries")))
            }
            Block::FaceSet(name, Some(k)) if facesets.last().map(|s| s.1.len()) != Some(*k) => {
                Err(err(path, at, format!("faceset '{name}' declares {k} entries")))
            }
            _ => Ok(()),
        }
    };

    for (n, line) in lines {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        let keyword = toks[0];
        if matches!(keyword, "nodes" | "elements" | "nodeset" | "faceset") {
            close(&block, &nodes, &elements, &nodesets, &facesets, block_line)?;
            block_line = n;
            let count = |i: usize| -> Result<Option<usize>> {
                toks.get(i)
                    .map(|t| t.parse::<usize>().map_err(|_| err(path, n, format!("invalid count '{t}'"))))
                    .transpose()
            };
            block = match keyword {
                "nodes" => Block::Nodes(count(1)?.ok_or_else(|| err(path, n, "nodes needs a count"))?),
                "elements" => Block::Elements(count(1)?.ok_or_else(|| err(path, n, "elements needs a count"))?),
                _ => {
                    let name = toks.get(1).ok_or_else(|| err(path, n, format!("{keyword} needs a name")))?.to_string();
                    if keyword == "nodeset" {
                        nodesets.push((name.clone(), Vec::new(), n));
                        Block::NodeSet(name, count(2)?)
                    } else {
                        facesets.push((name.clone(), Vec::new(), n));
                        Block::FaceSet(name, count(2)?)
                    }
                }
            };
            continue;
        }
        match &block {
            Block::None => return Err(err(path, n, format!("unexpected data line '{line}'"))),
            Block::Nodes(count) => {
                if nodes.len() == *count {
                    return Err(err(path, n, format!("more than {count} node lines")));
                }
                let x: Vec<f64> = toks
                    .iter()
                    .map(|t| t.parse::<f64>().map_err(|_| err(path, n, format!("invalid coordinate '{t}'"))))
                    .collect::<Result<_>>()?;
                if x.len() != dim {
                    return Err(err(path, n, format!("expected {dim} coordinates, found {}", x.len())));
                }
                nodes.push(x);
            }
            Block::Elements(count) => {
                if elements.len() == *count {
                    return Err(err(path, n, format!("more than {count} element lines")));
                }
                let conn: Vec<usize> = toks
                    .iter()
                    .map(|t| t.parse::<usize>().map_err(|_| err(path, n, format!("invalid node index '{t}'"))))
                    .collect::<Result<_>>()?;
                if conn.len() != etype.nodes_per_element() {
                    return Err(err(path, n, format!("{etype} needs {} nodes, found {}", etype.nodes_per_element(), conn.len())));
                }
                if let Some(&bad) = conn.iter().find(|&&i| i >= nodes.len()) {
                    return Err(err(path, n, format!("node index {bad} out of range")));
                }
                elements.push(conn);
            }
            Block::NodeSet(..) => {
                let set = &mut nodesets.last_mut().expect("nodeset open").1;
                for t in &toks {
                    let id = t.parse::<usize>().map_err(|_| err(path, n, format!("invalid node index '{t}'")))?;
                    if id >= nodes.len() {
                        return Err(err(path, n, format!("node index {id} out of range")));
                    }
                    set.push(id);
                }
            }
            Block::FaceSet(..) => {
                if toks.len() != 2 {
                    return Err(err(path, n, "faceset lines hold 'element face'"));
                }
                let e = toks[0].parse::<usize>().map_err(|_| err(path, n, format!("invalid element '{}'", toks[0])))?;
                let f = toks[1].parse::<usize>().map_err(|_| err(path, n, format!("invalid face '{}'", toks[1])))?;
                if e >= elements.len() || f >= etype.faces().len() {
                    return Err(err(path, n, format!("face ({e}, {f}) does not exist")));
                }
                facesets.last_mut().expect("faceset open").1.push((e, f));
            }
        }
    }
    close(&block, &nodes, &elements, &nodesets, &facesets, block_line)?;
    if nodes.is_empty() || elements.is_empty() {
        return Err(err(path, hline, "mesh needs nodes and elements blocks"));
    }
    let mut mesh = Mesh::new(etype, nodes, elements, section).map_err(|e| err(path, hline, e.to_string()))?;
    for (name, ids, line) in nodesets {
        mesh.add_nodeset(name, ids).map_err(|e| err(path, line, e.to_string()))?;
    }
    for (name, faces, line) in facesets {
        mesh.add_faceset(name, faces).map_err(|e| err(path, line, e.to_string()))?;
    }
    Ok(mesh)
}

pub fn read_mesh(path: impl AsRef<Path>) -> Result<Mesh> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_mesh(&text, path)
}

pub fn format_mesh(mesh: &Mesh) -> String {
    let mut out = String::new();
    out.push_str(MAGIC);
    out.push('\n');
    let _ = write!(out, "dim={} etype={}", mesh.dim(), mesh.element_type());
    if mesh.dim() < 3 {
        let _ = write!(out, " section={:e}", mesh.section());
    }
    out.push('\n');
    let _ = writeln!(out, "nodes {}", mesh.num_nodes());
    for i in 0..mesh.num_nodes() {
        let row: Vec<String> = mesh.node(i).iter().map(|v| format!("{v:e}")).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
    let _ = writeln!(out, "elements {}", mesh.num_elements());
    for e in 0..mesh.num_elements() {
        let row: Vec<String> = mesh.element(e).iter().map(|v| v.to_string()).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
    for (name, ids) in mesh.nodesets() {
        let _ = writeln!(out, "nodeset {name} {}", ids.len());
        for id in ids {
            let _ = writeln!(out, "{id}");
        }
    }
    for (name, faces) in mesh.facesets() {
        let _ = writeln!(out, "faceset {name} {}", faces.len());
        for (e, f) in faces {
            let _ = writeln!(out, "{e} {f}");
        }
    }
    out
}

pub fn write_mesh(path: impl AsRef<Path>, mesh: &Mesh) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, format_mesh(mesh)).map_err(|e| Error::io(path, e))
}
