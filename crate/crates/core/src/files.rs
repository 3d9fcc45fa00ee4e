//! Definition-file parsing.
//!
//! Automorphism files hold one automorphism per block, blocks separated by
//! blank lines, `#` starts a comment:
//!
//! ```text
//! rank 3
//! label tribonacci
//! images ab ac a
//! inverses c Ca Cb
//! ```
//!
//! `inverses` may be omitted; the bounded Nielsen helper then synthesizes the
//! inverse or the block is rejected.  Word literals follow the free-words
//! conventions (`a..z`, capitals for inverses; `x1 X2 …` tokens past rank 26).
//!
//! Graph files describe a marked graph and a self map:
//!
//! ```text
//! rank 2
//! vertices 2
//! edge t 0 1 tree
//! edge a 0 0 mark=a
//! edge b 1 1 mark=b
//! image t t
//! image a a
//! image b TatB
//! induced a ab
//! inverses a Ba
//! label push
//! ```
//!
//! Edge names are single letters `a..z` in declaration order; capitals
//! reverse.  `image` lines give tight edge paths; `induced`/`inverses` give
//! the outer class in `F_N`.

use thiserror::Error;

use crate::auto::Automorphism;
use crate::graph::{GraphSelfMap, MarkedGraph};
use crate::words::Word;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: automorphism rejected: {message}")]
    BadAutomorphism { line: usize, message: String },
    #[error("line {line}: graph rejected: {message}")]
    BadGraph { line: usize, message: String },
}

fn syntax(line: usize, message: impl Into<String>) -> ParseError {
    ParseError::Syntax {
        line,
        message: message.into(),
    }
}

/// Strip comments; yields (1-based line number, trimmed content).
fn meaningful_lines(text: &str) -> Vec<(usize, String)> {
    text.lines()
        .enumerate()
        .map(|(i, raw)| {
            let no_comment = raw.split('#').next().unwrap_or("");
            (i + 1, no_comment.trim().to_string())
        })
        .collect()
}

/// Parse every automorphism block in a definition file.
pub fn parse_automorphisms(text: &str) -> Result<Vec<Automorphism>, ParseError> {
    Ok(parse_automorphisms_with_provenance(text)?
        .into_iter()
        .map(|(auto, _)| auto)
        .collect())
}

/// Like [`parse_automorphisms`], also reporting whether each block supplied
/// its inverse explicitly (`true`) or had it synthesized (`false`).
pub fn parse_automorphisms_with_provenance(
    text: &str,
) -> Result<Vec<(Automorphism, bool)>, ParseError> {
    let mut blocks: Vec<Vec<(usize, String)>> = Vec::new();
    let mut current: Vec<(usize, String)> = Vec::new();
    for (line, content) in meaningful_lines(text) {
        if content.is_empty() {
            if !current.is_empty() {
                blocks.push(std::mem::take(&mut current));
            }
        } else {
            current.push((line, content));
        }
    }
    if !current.is_empty() {
        blocks.push(current);
    }
    if blocks.is_empty() {
        return Err(syntax(1, "no automorphism blocks found"));
    }
    blocks.into_iter().map(parse_block).collect()
}

fn parse_block(lines: Vec<(usize, String)>) -> Result<(Automorphism, bool), ParseError> {
    let first_line = lines[0].0;
    let mut rank: Option<u32> = None;
    let mut label: Option<String> = None;
    let mut images: Option<(usize, Vec<String>)> = None;
    let mut inverses: Option<(usize, Vec<String>)> = None;
    for (line, content) in &lines {
        let (key, rest) = content
            .split_once(char::is_whitespace)
            .unwrap_or((content.as_str(), ""));
        let rest = rest.trim();
        match key {
            "rank" => {
                rank = Some(rest.parse().map_err(|_| {
                    syntax(*line, format!("rank must be a positive integer, got {rest:?}"))
                })?);
            }
            "label" => label = Some(rest.to_string()),
            "images" => {
                images = Some((*line, rest.split_whitespace().map(String::from).collect()))
            }
            "inverses" => {
                inverses = Some((*line, rest.split_whitespace().map(String::from).collect()))
            }
            other => return Err(syntax(*line, format!("unknown field {other:?}"))),
        }
    }
    let rank = rank.ok_or_else(|| syntax(first_line, "missing rank"))?;
    if rank == 0 {
        return Err(syntax(first_line, "rank must be at least 1"));
    }
    let (img_line, image_literals) =
        images.ok_or_else(|| syntax(first_line, "missing images"))?;
    let parse_words = |line: usize, literals: &[String]| -> Result<Vec<Word>, ParseError> {
        literals
            .iter()
            .map(|lit| {
                Word::parse(rank, lit).map_err(|e| syntax(line, format!("word {lit:?}: {e}")))
            })
            .collect()
    };
    let images = parse_words(img_line, &image_literals)?;
    let label = label.unwrap_or_else(|| format!("auto@{first_line}"));
    match inverses {
        Some((inv_line, inverse_literals)) => {
            let inverse_images = parse_words(inv_line, &inverse_literals)?;
            Automorphism::new(rank, images, inverse_images, label)
                .map(|auto| (auto, true))
                .map_err(|e| ParseError::BadAutomorphism {
                    line: inv_line,
                    message: e.to_string(),
                })
        }
        None => Automorphism::with_synthesized_inverse(rank, images, label)
            .map(|auto| (auto, false))
            .map_err(|e| ParseError::BadAutomorphism {
                line: img_line,
                message: e.to_string(),
            }),
    }
}

/// Parse a graph/map definition file into a verified self map.
pub fn parse_graph_map(text: &str) -> Result<GraphSelfMap, ParseError> {
    let lines = meaningful_lines(text);
    let first_line = lines.iter().find(|(_, c)| !c.is_empty()).map_or(1, |(l, _)| *l);
    let mut rank: Option<u32> = None;
    let mut vertices: Option<usize> = None;
    let mut label: Option<String> = None;
    let mut edges: Vec<(usize, char, usize, usize, bool, Option<String>)> = Vec::new();
    let mut images: Vec<(usize, Vec<String>)> = Vec::new();
    let mut induced: Vec<(usize, Vec<String>)> = Vec::new();
    let mut inverses: Vec<(usize, Vec<String>)> = Vec::new();
    for (line, content) in &lines {
        if content.is_empty() {
            continue;
        }
        let fields: Vec<&str> = content.split_whitespace().collect();
        match fields[0] {
            "rank" => {
                rank = Some(fields.get(1).and_then(|s| s.parse().ok()).ok_or_else(|| {
                    syntax(*line, "rank must be a positive integer")
                })?)
            }
            "vertices" => {
                vertices = Some(fields.get(1).and_then(|s| s.parse().ok()).ok_or_else(
                    || syntax(*line, "vertices must be a nonnegative integer"),
                )?)
            }
            "label" => label = Some(fields[1..].join(" ")),
            "edge" => {
                if fields.len() < 4 {
                    return Err(syntax(*line, "edge needs: name origin terminus [tree|mark=w]"));
                }
                let name = fields[1];
                if name.len() != 1 || !name.chars().next().expect("len 1").is_ascii_lowercase() {
                    return Err(syntax(*line, "edge name must be a single letter a..z"));
                }
                let name = name.chars().next().expect("len 1");
                let origin: usize = fields[2]
                    .parse()
                    .map_err(|_| syntax(*line, "edge origin must be a vertex index"))?;
                let terminus: usize = fields[3]
                    .parse()
                    .map_err(|_| syntax(*line, "edge terminus must be a vertex index"))?;
                let mut in_tree = false;
                let mut marking = None;
                for extra in &fields[4..] {
                    if *extra == "tree" {
                        in_tree = true;
                    } else if let Some(word) = extra.strip_prefix("mark=") {
                        marking = Some(word.to_string());
                    } else {
                        return Err(syntax(*line, format!("unknown edge attribute {extra:?}")));
                    }
                }
                edges.push((*line, name, origin, terminus, in_tree, marking));
            }
            "image" => images.push((*line, fields[1..].iter().map(|s| s.to_string()).collect())),
            "induced" => induced.push((*line, fields[1..].iter().map(|s| s.to_string()).collect())),
            "inverses" => {
                inverses.push((*line, fields[1..].iter().map(|s| s.to_string()).collect()))
            }
            other => return Err(syntax(*line, format!("unknown field {other:?}"))),
        }
    }
    let rank = rank.ok_or_else(|| syntax(first_line, "missing rank"))?;
    let vertex_count = vertices.ok_or_else(|| syntax(first_line, "missing vertices"))?;
    if edges.is_empty() {
        return Err(syntax(first_line, "missing edge lines"));
    }
    // Edge names must be a..<name of last edge> in declaration order.
    for (i, (line, name, ..)) in edges.iter().enumerate() {
        let expected = (b'a' + i as u8) as char;
        if *name != expected {
            return Err(syntax(
                *line,
                format!("edges must be declared in order; expected {expected}, got {name}"),
            ));
        }
    }
    let edge_rank = edges.len() as u32;
    let mut graph_edges = Vec::new();
    for (line, _, origin, terminus, in_tree, marking) in &edges {
        let marking = match marking {
            Some(lit) => Word::parse(rank, lit)
                .map_err(|e| syntax(*line, format!("marking {lit:?}: {e}")))?,
            None => Word::identity(rank),
        };
        graph_edges.push((*origin, *terminus, *in_tree, marking));
    }
    let graph = MarkedGraph::new(rank, vertex_count, graph_edges).map_err(|e| {
        ParseError::BadGraph {
            line: first_line,
            message: e.to_string(),
        }
    })?;

    // Edge images, one per edge, matched by name.
    let mut edge_images: Vec<Option<Word>> = vec![None; edges.len()];
    for (line, fields) in &images {
        if fields.len() != 2 {
            return Err(syntax(*line, "image needs: edge-name edge-path"));
        }
        let name = fields[0].chars().next().ok_or_else(|| syntax(*line, "empty edge name"))?;
        let index = (name as u8).wrapping_sub(b'a') as usize;
        if fields[0].len() != 1 || index >= edges.len() {
            return Err(syntax(*line, format!("unknown edge {:?}", fields[0])));
        }
        let path = Word::parse(edge_rank, &fields[1])
            .map_err(|e| syntax(*line, format!("edge path {:?}: {e}", fields[1])))?;
        edge_images[index] = Some(path);
    }
    let edge_images: Vec<Word> = edge_images
        .into_iter()
        .enumerate()
        .map(|(i, img)| {
            img.ok_or_else(|| {
                syntax(
                    first_line,
                    format!("missing image for edge {}", (b'a' + i as u8) as char),
                )
            })
        })
        .collect::<Result<_, _>>()?;

    // Induced outer class.
    let collect_words = |entries: &[(usize, Vec<String>)],
                         what: &str|
     -> Result<Option<Vec<Word>>, ParseError> {
        if entries.is_empty() {
            return Ok(None);
        }
        let mut out = vec![None; rank as usize];
        for (line, fields) in entries {
            if fields.len() != 2 {
                return Err(syntax(*line, format!("{what} needs: generator word")));
            }
            let gen = Word::parse(rank, &fields[0])
                .map_err(|e| syntax(*line, format!("generator {:?}: {e}", fields[0])))?;
            if gen.len() != 1 || gen.letters()[0].is_inverse() {
                return Err(syntax(*line, format!("{what} key must be a single generator")));
            }
            let word = Word::parse(rank, &fields[1])
                .map_err(|e| syntax(*line, format!("word {:?}: {e}", fields[1])))?;
            out[(gen.letters()[0].index() - 1) as usize] = Some(word);
        }
        let words: Option<Vec<Word>> = out.into_iter().collect();
        match words {
            Some(w) => Ok(Some(w)),
            None => Err(syntax(first_line, format!("{what} must cover every generator"))),
        }
    };
    let induced_images = collect_words(&induced, "induced")?
        .ok_or_else(|| syntax(first_line, "missing induced lines"))?;
    let label = label.unwrap_or_else(|| format!("graph-map@{first_line}"));
    let outer = match collect_words(&inverses, "inverses")? {
        Some(inverse_images) => Automorphism::new(rank, induced_images, inverse_images, label),
        None => Automorphism::with_synthesized_inverse(rank, induced_images, label),
    }
    .map_err(|e| ParseError::BadAutomorphism {
        line: first_line,
        message: e.to_string(),
    })?;

    // Vertex map: forced by the image of any edge leaving each vertex.
    let mut vertex_map = vec![usize::MAX; vertex_count];
    for i in 0..edges.len() {
        let e = crate::words::Letter::generator(i as u32 + 1);
        for d in [e, e.inverse()] {
            let img = if d.is_inverse() {
                edge_images[i].inverse()
            } else {
                edge_images[i].clone()
            };
            if img.is_empty() {
                continue;
            }
            let v = graph.origin(d);
            let target = graph.origin(img.letters()[0]);
            if vertex_map[v] == usize::MAX {
                vertex_map[v] = target;
            }
        }
    }
    if vertex_map.iter().any(|&v| v == usize::MAX) {
        return Err(ParseError::BadGraph {
            line: first_line,
            message: "vertex map could not be derived from the edge images".into(),
        });
    }

    GraphSelfMap::new(graph, vertex_map, edge_images, outer).map_err(|e| ParseError::BadGraph {
        line: first_line,
        message: e.to_string(),
    })
}
