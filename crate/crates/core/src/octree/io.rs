//! Binary serialization of a semantic octree.
//!
//! Layout, little endian: magic `SOCT`, `u16` version, `u16` class count,
//! `u8` max depth, then resolution, alpha, min and max thresholds and the
//! others increment as `f64`. Nodes follow in preorder with children in
//! Morton order. Each node is a `u8` child mask (`0x00` leaf, `0xFF` inner),
//! four `u8` class ids (top slots then the others slot; `0xFF` marks the
//! others slot and unused slots) and four `f64` log ratios.

use std::io::{self, Read, Write};

use serde::{Deserialize, Serialize};

use super::{NodeState, OctreeNode, OctreeParams, SemanticOctree, TOP_SLOTS};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"SOCT";
pub const FORMAT_VERSION: u16 = 1;

const NO_CLASS: u8 = 0xFF;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OctreeStats {
    pub node_count: usize,
    pub leaf_count: usize,
    /// Number of leaves at each depth, root first.
    pub depth_histogram: Vec<usize>,
}

pub fn write_octree<W: Write>(tree: &SemanticOctree, mut w: W) -> io::Result<()> {
    let p = tree.params();
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(tree.num_classes() as u16).to_le_bytes())?;
    w.write_all(&[p.max_depth])?;
    for v in [
        p.resolution,
        p.alpha,
        p.min_thresh,
        p.max_thresh,
        p.phi_plus_others,
    ] {
        w.write_all(&v.to_le_bytes())?;
    }
    write_node(tree.root(), &mut w)
}

fn write_node<W: Write>(node: &OctreeNode, w: &mut W) -> io::Result<()> {
    let s = node.state();
    let mut ids = [NO_CLASS; TOP_SLOTS + 1];
    let mut vals = [0.0; TOP_SLOTS + 1];
    for (i, &(c, v)) in s.top().iter().enumerate() {
        ids[i] = c as u8;
        vals[i] = v;
    }
    vals[TOP_SLOTS] = s.others();
    w.write_all(&[if node.is_leaf() { 0x00 } else { 0xFF }])?;
    w.write_all(&ids)?;
    for v in vals {
        w.write_all(&v.to_le_bytes())?;
    }
    if let Some(children) = node.children() {
        for c in children.iter() {
            write_node(c, w)?;
        }
    }
    Ok(())
}

fn decode(e: io::Error) -> Error {
    Error::Decode(e.to_string())
}

fn read_array<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf).map_err(decode)?;
    Ok(buf)
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    Ok(f64::from_le_bytes(read_array(r)?))
}

pub fn read_octree<R: Read>(mut r: R) -> Result<SemanticOctree> {
    if &read_array::<4, _>(&mut r)? != MAGIC {
        return Err(Error::Decode("bad magic".into()));
    }
    let version = u16::from_le_bytes(read_array(&mut r)?);
    if version != FORMAT_VERSION {
        return Err(Error::Decode(format!("unsupported version {version}")));
    }
    let k = u16::from_le_bytes(read_array(&mut r)?) as usize;
    let [max_depth] = read_array(&mut r)?;
    let params = OctreeParams {
        resolution: read_f64(&mut r)?,
        max_depth,
        alpha: read_f64(&mut r)?,
        min_thresh: read_f64(&mut r)?,
        max_thresh: read_f64(&mut r)?,
        phi_plus_others: read_f64(&mut r)?,
    };
    params.validate()?;
    let root = read_node(&mut r, k, &params, 0)?;
    let mut rest = [0u8; 1];
    if r.read(&mut rest).map_err(decode)? != 0 {
        return Err(Error::Decode("trailing bytes".into()));
    }
    SemanticOctree::from_root(params, k, root)
}

fn read_node<R: Read>(r: &mut R, k: usize, params: &OctreeParams, depth: u8) -> Result<OctreeNode> {
    let [mask] = read_array(r)?;
    let ids: [u8; TOP_SLOTS + 1] = read_array(r)?;
    let mut vals = [0.0; TOP_SLOTS + 1];
    for v in vals.iter_mut() {
        *v = read_f64(r)?;
    }
    let slots: Vec<(u16, f64)> = ids[..TOP_SLOTS]
        .iter()
        .zip(vals)
        .take_while(|(&c, _)| c != NO_CLASS)
        .map(|(&c, v)| (c as u16, v))
        .collect();
    if slots.len() != k.min(TOP_SLOTS)
        || slots.iter().any(|&(c, _)| c as usize > k)
        || ids[TOP_SLOTS] != NO_CLASS
    {
        return Err(Error::Decode(format!(
            "bad class ids {ids:?} at depth {depth}"
        )));
    }
    let state = NodeState::from_parts(&slots, vals[TOP_SLOTS], params)?;
    // from_parts canonicalizes; a stored state must already be canonical
    if state.top() != slots.as_slice() || state.others() != vals[TOP_SLOTS] {
        return Err(Error::Decode(format!(
            "non-canonical node at depth {depth}"
        )));
    }
    let mut node = OctreeNode::leaf(state);
    match mask {
        0x00 => {}
        0xFF if depth < params.max_depth => {
            let mut children = Vec::with_capacity(8);
            for _ in 0..8 {
                children.push(read_node(r, k, params, depth + 1)?);
            }
            node.children = Some(Box::new(children.try_into().expect("eight children")));
        }
        _ => {
            return Err(Error::Decode(format!(
                "bad child mask {mask:#04x} at depth {depth}"
            )))
        }
    }
    Ok(node)
}
