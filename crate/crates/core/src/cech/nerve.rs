//! The nerve of a partial cover.

use std::collections::HashMap;

use crate::finspace::{PartialCover, PointSet};

/// Simplicial complex whose vertices are the nonempty cover members and whose
/// simplices are the vertex sets with a common point.
#[derive(Clone, Debug, PartialEq)]
pub struct Nerve {
    /// `vertex_member[v]` is the index of the cover member behind vertex `v`.
    vertex_member: Vec<usize>,
    /// `member_vertex[m]` is `None` for empty members.
    member_vertex: Vec<Option<usize>>,
    /// `simplices[k]` holds the `k`-simplices as ascending vertex tuples, in
    /// lexicographic order.
    simplices: Vec<Vec<Vec<usize>>>,
    index: Vec<HashMap<Vec<usize>, usize>>,
}

impl Nerve {
    /// Nerve of `cover` up to dimension `max_dim` (all dimensions if `None`).
    pub fn new(cover: &PartialCover, max_dim: Option<usize>) -> Self {
        let members = cover.members();
        let mut vertex_member = Vec::new();
        let mut member_vertex = vec![None; members.len()];
        for (m, set) in members.iter().enumerate() {
            if set.count_ones(..) > 0 {
                member_vertex[m] = Some(vertex_member.len());
                vertex_member.push(m);
            }
        }
        let n = vertex_member.len();
        let top = match max_dim {
            Some(d) => d.min(n.saturating_sub(1)),
            None => n.saturating_sub(1),
        };
        let mut simplices: Vec<Vec<Vec<usize>>> = vec![Vec::new(); if n == 0 { 0 } else { top + 1 }];
        fn extend(
            members: &[PointSet],
            vertex_member: &[usize],
            current: &mut Vec<usize>,
            common: &PointSet,
            top: usize,
            out: &mut [Vec<Vec<usize>>],
        ) {
            out[current.len() - 1].push(current.clone());
            if current.len() > top {
                return;
            }
            let start = current.last().map_or(0, |&v| v + 1);
            for v in start..vertex_member.len() {
                let mut meet = common.clone();
                meet.intersect_with(&members[vertex_member[v]]);
                if meet.count_ones(..) > 0 {
                    current.push(v);
                    extend(members, vertex_member, current, &meet, top, out);
                    current.pop();
                }
            }
        }
        for v in 0..n {
            let mut current = vec![v];
            extend(members, &vertex_member, &mut current, &members[vertex_member[v]], top, &mut simplices);
        }
        // depth-first emission interleaves dimensions but keeps each one lexicographic
        for level in &mut simplices {
            level.sort();
        }
        let index = simplices
            .iter()
            .map(|level| level.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect())
            .collect();
        Self { vertex_member, member_vertex, simplices, index }
    }

    pub fn n_vertices(&self) -> usize {
        self.vertex_member.len()
    }

    /// Highest dimension built, or `None` for the empty nerve.
    pub fn dimension(&self) -> Option<usize> {
        self.simplices.iter().rposition(|l| !l.is_empty())
    }

    pub fn simplices(&self, k: usize) -> &[Vec<usize>] {
        self.simplices.get(k).map_or(&[], |l| l.as_slice())
    }

    pub fn count(&self, k: usize) -> usize {
        self.simplices(k).len()
    }

    pub fn simplex_index(&self, k: usize, simplex: &[usize]) -> Option<usize> {
        self.index.get(k)?.get(simplex).copied()
    }

    pub fn vertex_of_member(&self, member: usize) -> Option<usize> {
        self.member_vertex.get(member).copied().flatten()
    }

    pub fn member_of_vertex(&self, vertex: usize) -> usize {
        self.vertex_member[vertex]
    }
}
