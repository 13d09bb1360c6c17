//! Netlist-style composition of multiport blocks.

use super::{interconnect, renormalize, MultiportNetwork};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BlockId(usize);

/// Collects blocks and wires, then reduces them with one interconnect.
///
/// When the two ends of a wire have different reference impedances, the
/// second end is renormalized to the first end's reference before joining.
#[derive(Debug, Default)]
pub struct Circuit {
    blocks: Vec<MultiportNetwork>,
    wires: Vec<((BlockId, usize), (BlockId, usize))>,
    exposed: Vec<(BlockId, usize)>,
}

impl Circuit {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, net: MultiportNetwork) -> BlockId {
        self.blocks.push(net);
        BlockId(self.blocks.len() - 1)
    }

    pub fn connect(&mut self, a: (BlockId, usize), b: (BlockId, usize)) -> &mut Self {
        self.wires.push((a, b));
        self
    }

    /// Appends an external port; external ports appear in call order.
    pub fn expose(&mut self, port: (BlockId, usize)) -> &mut Self {
        self.exposed.push(port);
        self
    }

    pub fn build(mut self) -> Result<MultiportNetwork> {
        let offsets: Vec<usize> = self
            .blocks
            .iter()
            .scan(0, |acc, b| {
                let o = *acc;
                *acc += b.port_count();
                Some(o)
            })
            .collect();
        let total: usize = self.blocks.iter().map(|b| b.port_count()).sum();
        let global = |(BlockId(b), p): (BlockId, usize), blocks: &[MultiportNetwork]| -> Result<usize> {
            let count = blocks[b].port_count();
            if p >= count {
                return Err(Error::InvalidPort { port: p, count });
            }
            Ok(offsets[b] + p)
        };

        for &(a, b) in &self.wires {
            global(a, &self.blocks)?;
            global(b, &self.blocks)?;
            let target = self.blocks[a.0 .0].ports()[a.1].clone();
            let block = &self.blocks[b.0 .0];
            if block.ports()[b.1].z_ref != target.z_ref {
                let mut ports = block.ports().to_vec();
                ports[b.1].z_ref = target.z_ref;
                self.blocks[b.0 .0] = renormalize(block, ports)?;
            }
        }

        let mut used = vec![false; total];
        let mut pairs = Vec::with_capacity(self.wires.len());
        for &(a, b) in &self.wires {
            let (ga, gb) = (global(a, &self.blocks)?, global(b, &self.blocks)?);
            pairs.push((ga, gb));
            used[ga] = true;
            used[gb] = true;
        }
        let mut external = Vec::with_capacity(self.exposed.len());
        for &e in &self.exposed {
            let g = global(e, &self.blocks)?;
            if used[g] {
                return Err(Error::Precondition(format!(
                    "port {} of block {} is both wired and exposed",
                    e.1, e.0 .0
                )));
            }
            used[g] = true;
            external.push(g);
        }
        if let Some(dangling) = used.iter().position(|u| !u) {
            return Err(Error::Precondition(format!(
                "circuit port {dangling} is neither wired nor exposed"
            )));
        }

        let refs: Vec<&MultiportNetwork> = self.blocks.iter().collect();
        let stacked = MultiportNetwork::stack(&refs)?;
        let reduced = if pairs.is_empty() {
            stacked
        } else {
            interconnect(&stacked, &pairs)?
        };
        // Reduced ports keep stacking order; map them to exposure order.
        let mut sorted = external.clone();
        sorted.sort_unstable();
        let order: Vec<usize> = external
            .iter()
            .map(|g| sorted.binary_search(g).expect("exposed port present"))
            .collect();
        reduced.permute(&order)
    }
}
