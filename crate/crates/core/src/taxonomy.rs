//! Class hierarchy, depth normalization and the indexed table of
//! root-to-leaf paths.
//!
//! Paths are ordered lexicographically by the tuple of node names along the
//! path. Children are kept sorted by name, so a depth-first walk visits leaves
//! in path order and the paths through any node form a contiguous index
//! range. Nodes at a given depth are likewise ordered by their root-to-node
//! name tuple.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::ops::Range;
use std::path::Path;

use crate::error::{Error, Result};

/// Reserved name of the root node in hierarchy files.
pub const ROOT: &str = "ROOT";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub usize);

#[derive(Clone, Debug, PartialEq)]
pub struct TaxonomyNode {
    pub id: NodeId,
    pub name: String,
    /// 0 for the root.
    pub depth: usize,
    pub parent: Option<NodeId>,
    /// Sorted by name.
    pub children: Vec<NodeId>,
    /// Inserted by [`Taxonomy::normalize_depth`].
    pub is_dummy: bool,
    /// For dummy nodes, the real leaf this chain extends.
    pub extends: Option<NodeId>,
}

/// A rooted tree of classes.
#[derive(Clone, Debug, PartialEq)]
pub struct Taxonomy {
    nodes: Vec<TaxonomyNode>,
    by_name: HashMap<String, NodeId>,
    root: NodeId,
    depth: usize,
    /// `levels[k]` holds the nodes at depth `k` in name-tuple order.
    levels: Vec<Vec<NodeId>>,
}

impl Taxonomy {
    /// Builds a tree from `(parent, child)` edges. Exactly one node must be
    /// parentless; it becomes the root. Repeated identical edges are ignored.
    pub fn from_edges<S: AsRef<str>>(edges: &[(S, S)]) -> Result<Self> {
        if edges.is_empty() {
            return Err(Error::EmptyHierarchy);
        }
        let mut names: Vec<String> = Vec::new();
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut intern = |name: &str, names: &mut Vec<String>| -> usize {
            *index.entry(name.to_string()).or_insert_with(|| {
                names.push(name.to_string());
                names.len() - 1
            })
        };
        let mut parent: Vec<Option<usize>> = Vec::new();
        for (p, c) in edges {
            let p = intern(p.as_ref(), &mut names);
            let c = intern(c.as_ref(), &mut names);
            parent.resize(names.len(), None);
            match parent[c] {
                Some(existing) if existing != p => {
                    return Err(Error::DuplicateParent {
                        child: names[c].clone(),
                        first: names[existing].clone(),
                        second: names[p].clone(),
                    })
                }
                _ => parent[c] = Some(p),
            }
        }

        // Any parent chain longer than the node count must loop.
        for start in 0..names.len() {
            let mut cur = start;
            let mut steps = 0;
            while let Some(p) = parent[cur] {
                if p == start || steps > names.len() {
                    return Err(Error::Cycle(names[start].clone()));
                }
                cur = p;
                steps += 1;
            }
        }

        let roots: Vec<usize> = (0..names.len()).filter(|&i| parent[i].is_none()).collect();
        match roots.as_slice() {
            [] => return Err(Error::Cycle(names[0].clone())),
            [_] => {}
            [a, b, ..] => return Err(Error::MultipleRoots(names[*a].clone(), names[*b].clone())),
        }

        let nodes = names
            .into_iter()
            .enumerate()
            .map(|(i, name)| TaxonomyNode {
                id: NodeId(i),
                name,
                depth: 0,
                parent: parent[i].map(NodeId),
                children: Vec::new(),
                is_dummy: false,
                extends: None,
            })
            .collect();
        Ok(Self::assemble(nodes, NodeId(roots[0])))
    }

    /// Reads a `parent<TAB>child` hierarchy file. Blank lines and lines
    /// starting with `#` are skipped. When [`ROOT`] does not appear and the
    /// file has several top-level classes, a synthetic root is placed above
    /// them.
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let reader = BufReader::new(File::open(path)?);
        let mut edges = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim_end_matches(['\r', '\n']);
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.split('\t');
            match (fields.next(), fields.next(), fields.next()) {
                (Some(p), Some(c), None) if !p.is_empty() && !c.is_empty() => {
                    edges.push((p.to_string(), c.to_string()))
                }
                _ => {
                    return Err(Error::Parse {
                        path: path.to_path_buf(),
                        line: lineno + 1,
                        message: "expected `parent<TAB>child`".into(),
                    })
                }
            }
        }
        Self::from_edges(&with_synthetic_root(edges))
    }

    fn assemble(mut nodes: Vec<TaxonomyNode>, root: NodeId) -> Self {
        for n in nodes.iter_mut() {
            n.children.clear();
        }
        for i in 0..nodes.len() {
            if let Some(p) = nodes[i].parent {
                nodes[p.0].children.push(NodeId(i));
            }
        }
        let names: Vec<String> = nodes.iter().map(|n| n.name.clone()).collect();
        for n in nodes.iter_mut() {
            n.children.sort_by(|a, b| names[a.0].cmp(&names[b.0]));
        }

        let mut levels: Vec<Vec<NodeId>> = Vec::new();
        let mut stack = vec![(root, 0usize)];
        while let Some((id, depth)) = stack.pop() {
            nodes[id.0].depth = depth;
            if levels.len() <= depth {
                levels.resize(depth + 1, Vec::new());
            }
            levels[depth].push(id);
            for &c in nodes[id.0].children.iter().rev() {
                stack.push((c, depth + 1));
            }
        }
        let by_name = nodes.iter().map(|n| (n.name.clone(), n.id)).collect();
        Taxonomy {
            depth: levels.len() - 1,
            nodes,
            by_name,
            root,
            levels,
        }
    }

    /// Extends every leaf shallower than the maximum depth with a chain of
    /// dummy children until it reaches that depth. Dummy names are the
    /// extended leaf's name followed by `~k` for the k-th added level.
    pub fn normalize_depth(&self) -> Self {
        let mut nodes = self.nodes.clone();
        let mut taken: std::collections::HashSet<String> =
            nodes.iter().map(|n| n.name.clone()).collect();
        let shallow: Vec<NodeId> = self
            .nodes
            .iter()
            .filter(|n| n.children.is_empty() && n.depth < self.depth)
            .map(|n| n.id)
            .collect();
        for leaf in shallow {
            let mut parent = leaf;
            for k in 1..=(self.depth - self.nodes[leaf.0].depth) {
                let mut name = format!("{}~{}", self.nodes[leaf.0].name, k);
                while taken.contains(&name) {
                    name.push('~');
                }
                taken.insert(name.clone());
                let id = NodeId(nodes.len());
                nodes.push(TaxonomyNode {
                    id,
                    name,
                    depth: 0,
                    parent: Some(parent),
                    children: Vec::new(),
                    is_dummy: true,
                    extends: Some(leaf),
                });
                parent = id;
            }
        }
        Self::assemble(nodes, self.root)
    }

    pub fn is_normalized(&self) -> bool {
        self.nodes
            .iter()
            .all(|n| !n.children.is_empty() || n.depth == self.depth)
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    /// Depth `d` of the deepest leaf.
    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: NodeId) -> &TaxonomyNode {
        &self.nodes[id.0]
    }

    pub fn nodes(&self) -> &[TaxonomyNode] {
        &self.nodes
    }

    pub fn id(&self, name: &str) -> Option<NodeId> {
        self.by_name.get(name).copied()
    }

    pub fn name(&self, id: NodeId) -> &str {
        &self.nodes[id.0].name
    }

    /// Nodes at depth `k` (dummies included) in name-tuple order.
    pub fn level(&self, k: usize) -> &[NodeId] {
        self.levels.get(k).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Non-dummy nodes at depth `k` in name-tuple order. Similarity vectors
    /// are indexed by this order.
    pub fn real_level(&self, k: usize) -> Vec<NodeId> {
        self.level(k)
            .iter()
            .copied()
            .filter(|&id| !self.nodes[id.0].is_dummy)
            .collect()
    }

    pub fn leaves(&self) -> Vec<NodeId> {
        self.levels
            .iter()
            .flatten()
            .copied()
            .filter(|&id| self.nodes[id.0].children.is_empty())
            .collect()
    }

    /// Non-root ancestors of `id` ordered from depth 1 down to `id` itself.
    pub fn chain(&self, id: NodeId) -> Vec<NodeId> {
        let mut out = Vec::with_capacity(self.nodes[id.0].depth);
        let mut cur = Some(id);
        while let Some(c) = cur {
            if c == self.root {
                break;
            }
            out.push(c);
            cur = self.nodes[c.0].parent;
        }
        out.reverse();
        out
    }

    /// Whether `a` lies on the root chain of `b` (or equals it).
    pub fn is_ancestor_or_self(&self, a: NodeId, b: NodeId) -> bool {
        let mut cur = Some(b);
        while let Some(c) = cur {
            if c == a {
                return true;
            }
            cur = self.nodes[c.0].parent;
        }
        false
    }

    /// Classes that take part in evaluation: all non-root, non-dummy nodes.
    pub fn classes(&self) -> Vec<NodeId> {
        self.levels
            .iter()
            .skip(1)
            .flatten()
            .copied()
            .filter(|&id| !self.nodes[id.0].is_dummy)
            .collect()
    }

    /// Edges of the non-dummy part of the tree in name-tuple order.
    pub fn edges(&self) -> Vec<(String, String)> {
        self.levels
            .iter()
            .skip(1)
            .flatten()
            .filter(|&&id| !self.nodes[id.0].is_dummy)
            .map(|&id| {
                let p = self.nodes[id.0].parent.expect("non-root has a parent");
                (self.nodes[p.0].name.clone(), self.nodes[id.0].name.clone())
            })
            .collect()
    }

    /// Whether a node set, together with the root, forms a chain from the
    /// root down to a leaf of the original (pre-normalization) tree.
    pub fn is_root_to_leaf_chain(&self, nodes: &[NodeId]) -> bool {
        let mut sorted = nodes.to_vec();
        sorted.sort_by_key(|&id| self.nodes[id.0].depth);
        let mut prev = self.root;
        for &id in &sorted {
            let n = &self.nodes[id.0];
            if n.is_dummy || n.parent != Some(prev) {
                return false;
            }
            prev = id;
        }
        prev != self.root
            && self.nodes[prev.0]
                .children
                .iter()
                .all(|&c| self.nodes[c.0].is_dummy)
    }
}

/// Inserts [`ROOT`] above the top-level classes when the edge list has
/// several parentless nodes and does not name the root itself.
pub fn with_synthetic_root(mut edges: Vec<(String, String)>) -> Vec<(String, String)> {
    if edges.iter().any(|(p, c)| p == ROOT || c == ROOT) {
        return edges;
    }
    let children: std::collections::HashSet<&str> = edges.iter().map(|(_, c)| c.as_str()).collect();
    let mut tops: Vec<String> = Vec::new();
    for (p, _) in &edges {
        if !children.contains(p.as_str()) && !tops.contains(p) {
            tops.push(p.clone());
        }
    }
    if tops.len() > 1 {
        let extra: Vec<_> = tops.into_iter().map(|t| (ROOT.to_string(), t)).collect();
        edges.splice(0..0, extra);
    }
    edges
}

/// The ordered set of root-to-leaf paths of a depth-normalized taxonomy.
#[derive(Clone, Debug, PartialEq)]
pub struct PathTable {
    /// Each path lists the nodes at depths `1..=d`.
    paths: Vec<Vec<NodeId>>,
    leaf_to_path: HashMap<NodeId, usize>,
    /// Contiguous range of path indices passing through each node.
    spans: Vec<Range<usize>>,
}

impl PathTable {
    pub fn new(t: &Taxonomy) -> Result<Self> {
        if !t.is_normalized() {
            return Err(Error::NotNormalized);
        }
        let leaves = t.level(t.depth()).to_vec();
        let paths: Vec<Vec<NodeId>> = leaves.iter().map(|&l| t.chain(l)).collect();
        let leaf_to_path = leaves.iter().enumerate().map(|(j, &l)| (l, j)).collect();
        let mut spans = vec![Range { start: usize::MAX, end: 0 }; t.len()];
        for (j, path) in paths.iter().enumerate() {
            for &id in path.iter().chain(std::iter::once(&t.root())) {
                let s = &mut spans[id.0];
                s.start = s.start.min(j);
                s.end = s.end.max(j + 1);
            }
        }
        for s in spans.iter_mut() {
            if s.start == usize::MAX {
                *s = 0..0;
            }
        }
        Ok(PathTable {
            paths,
            leaf_to_path,
            spans,
        })
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn path(&self, j: usize) -> &[NodeId] {
        &self.paths[j]
    }

    pub fn paths(&self) -> &[Vec<NodeId>] {
        &self.paths
    }

    pub fn path_of_leaf(&self, leaf: NodeId) -> Option<usize> {
        self.leaf_to_path.get(&leaf).copied()
    }

    /// Indices of the paths passing through `id`.
    pub fn span(&self, id: NodeId) -> Range<usize> {
        self.spans[id.0].clone()
    }

    /// The nodes of path `j` with dummies removed.
    pub fn labels(&self, t: &Taxonomy, j: usize) -> Vec<NodeId> {
        self.paths[j]
            .iter()
            .copied()
            .filter(|&id| !t.node(id).is_dummy)
            .collect()
    }

    /// Node names along path `j`, dummies included.
    pub fn names<'a>(&self, t: &'a Taxonomy, j: usize) -> Vec<&'a str> {
        self.paths[j].iter().map(|&id| t.name(id)).collect()
    }
}
