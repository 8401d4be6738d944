//! The hidden population: an undirected simple network with node ages,
//! binary outcomes and optional extra attributes.

use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};

/// Extra per-node attribute column.
#[derive(Debug, Clone, PartialEq)]
pub enum AttrColumn {
    Numeric(Vec<f64>),
    /// Small-integer codes into `levels`.
    Categorical {
        codes: Vec<u32>,
        levels: Vec<String>,
    },
}

impl AttrColumn {
    pub fn len(&self) -> usize {
        match self {
            AttrColumn::Numeric(v) => v.len(),
            AttrColumn::Categorical { codes, .. } => codes.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Numeric view: categorical columns expose their codes.
    pub fn value(&self, i: usize) -> f64 {
        match self {
            AttrColumn::Numeric(v) => v[i],
            AttrColumn::Categorical { codes, .. } => codes[i] as f64,
        }
    }
}

/// Symmetric dyad-level values, e.g. meeting frequency between two people.
/// Pairs not listed evaluate to zero.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TieTable {
    values: HashMap<(usize, usize), f64>,
}

impl TieTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a value for the unordered pair. A second insert for the same
    /// pair must agree with the first.
    pub fn insert(&mut self, i: usize, j: usize, value: f64) -> Result<()> {
        let key = (i.min(j), i.max(j));
        match self.values.get(&key) {
            Some(&old) if old != value => Err(Error::Data(format!(
                "asymmetric tie value for pair ({i}, {j}): {old} vs {value}"
            ))),
            _ => {
                self.values.insert(key, value);
                Ok(())
            }
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values
            .get(&(i.min(j), i.max(j)))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Entries as `(low, high, value)`, sorted.
    pub fn entries(&self) -> Vec<(usize, usize, f64)> {
        let mut out: Vec<_> = self.values.iter().map(|(&(a, b), &v)| (a, b, v)).collect();
        out.sort_by_key(|x| (x.0, x.1));
        out
    }
}

/// Per-level tie counts of one node with respect to a categorical attribute.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupDegrees {
    pub node: usize,
    pub attr: String,
    pub levels: Vec<String>,
    /// `counts[k]` is the number of neighbours at level `k`.
    pub counts: Vec<usize>,
}

impl GroupDegrees {
    pub fn count(&self, level: &str) -> usize {
        self.levels
            .iter()
            .position(|l| l == level)
            .map(|k| self.counts[k])
            .unwrap_or(0)
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

/// Immutable population network.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    ids: Vec<String>,
    neighbors: Vec<Vec<usize>>,
    ages: Vec<f64>,
    infection: Vec<u8>,
    attrs: BTreeMap<String, AttrColumn>,
    tie_tables: BTreeMap<String, TieTable>,
}

pub const RESERVED_ATTRS: [&str; 3] = ["id", "age", "z"];

impl Population {
    /// Builds a population from an undirected edge list. Self-ties,
    /// duplicate ties and out-of-range endpoints are rejected.
    pub fn from_edges(
        ages: Vec<f64>,
        infection: Vec<u8>,
        edges: &[(usize, usize)],
    ) -> Result<Self> {
        let n = ages.len();
        let mut neighbors = vec![Vec::new(); n];
        for &(a, b) in edges {
            if a >= n {
                return Err(Error::Index { index: a, n });
            }
            if b >= n {
                return Err(Error::Index { index: b, n });
            }
            if a == b {
                return Err(Error::Data(format!("self-tie on node {a}")));
            }
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
        for (i, row) in neighbors.iter_mut().enumerate() {
            row.sort_unstable();
            if row.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::Data(format!("duplicate tie at node {i}")));
            }
        }
        Self::from_neighbor_lists(ages, infection, neighbors)
    }

    /// Builds from sorted, symmetric neighbour lists.
    pub fn from_neighbor_lists(
        ages: Vec<f64>,
        infection: Vec<u8>,
        neighbors: Vec<Vec<usize>>,
    ) -> Result<Self> {
        let n = ages.len();
        if infection.len() != n || neighbors.len() != n {
            return Err(Error::Data(format!(
                "length mismatch: {} ages, {} outcomes, {} adjacency rows",
                n,
                infection.len(),
                neighbors.len()
            )));
        }
        if let Some(i) = ages.iter().position(|a| !(a.is_finite() && *a > 0.0)) {
            return Err(Error::Data(format!(
                "age of node {i} must be positive, got {}",
                ages[i]
            )));
        }
        if let Some(i) = infection.iter().position(|&z| z > 1) {
            return Err(Error::Data(format!("outcome of node {i} must be 0 or 1")));
        }
        for (i, row) in neighbors.iter().enumerate() {
            for &j in row {
                if j >= n {
                    return Err(Error::Index { index: j, n });
                }
                if j == i {
                    return Err(Error::Data(format!("self-tie on node {i}")));
                }
                if neighbors[j].binary_search(&i).is_err() {
                    return Err(Error::Data(format!("tie {i}-{j} is not symmetric")));
                }
            }
            if row.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Data(format!(
                    "neighbour list of node {i} is not strictly sorted"
                )));
            }
        }
        Ok(Self {
            ids: (0..n).map(|i| i.to_string()).collect(),
            neighbors,
            ages,
            infection,
            attrs: BTreeMap::new(),
            tie_tables: BTreeMap::new(),
        })
    }

    pub fn with_ids(mut self, ids: Vec<String>) -> Result<Self> {
        if ids.len() != self.n() {
            return Err(Error::Data(format!(
                "expected {} ids, got {}",
                self.n(),
                ids.len()
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for id in &ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::Data(format!("duplicate node id `{id}`")));
            }
        }
        self.ids = ids;
        Ok(self)
    }

    pub fn with_attr(mut self, name: &str, column: AttrColumn) -> Result<Self> {
        if RESERVED_ATTRS.contains(&name) {
            return Err(Error::Data(format!("attribute name `{name}` is reserved")));
        }
        if column.len() != self.n() {
            return Err(Error::Data(format!(
                "attribute `{name}` has {} values for {} nodes",
                column.len(),
                self.n()
            )));
        }
        self.attrs.insert(name.to_string(), column);
        Ok(self)
    }

    pub fn with_tie_table(mut self, name: &str, table: TieTable) -> Result<Self> {
        if let Some(&(a, b, _)) = table
            .entries()
            .iter()
            .find(|(a, b, _)| *a >= self.n() || *b >= self.n())
        {
            return Err(Error::Index {
                index: a.max(b),
                n: self.n(),
            });
        }
        self.tie_tables.insert(name.to_string(), table);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.ages.len()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn ages(&self) -> &[f64] {
        &self.ages
    }

    pub fn infection(&self) -> &[u8] {
        &self.infection
    }

    pub fn attrs(&self) -> &BTreeMap<String, AttrColumn> {
        &self.attrs
    }

    pub fn tie_tables(&self) -> &BTreeMap<String, TieTable> {
        &self.tie_tables
    }

    pub fn tie_table(&self, name: &str) -> Option<&TieTable> {
        self.tie_tables.get(name)
    }

    /// Sorted neighbour list of `i`. Panics when `i` is out of range.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn has_tie(&self, i: usize, j: usize) -> bool {
        self.neighbors[i].binary_search(&j).is_ok()
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Ties as `(i, j)` with `i < j`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.neighbors
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().filter(move |&&j| j > i).map(move |&j| (i, j)))
    }

    fn check(&self, i: usize) -> Result<()> {
        if i < self.n() {
            Ok(())
        } else {
            Err(Error::Index {
                index: i,
                n: self.n(),
            })
        }
    }

    pub fn degree(&self, i: usize) -> Result<usize> {
        self.check(i)?;
        Ok(self.neighbors[i].len())
    }

    pub fn mean_degree(&self) -> f64 {
        if self.n() == 0 {
            return 0.0;
        }
        2.0 * self.edge_count() as f64 / self.n() as f64
    }

    pub fn isolated_count(&self) -> usize {
        self.neighbors.iter().filter(|r| r.is_empty()).count()
    }

    /// Numeric value of a named attribute at node `i`; `age` and `z` are built in.
    pub fn value(&self, i: usize, name: &str) -> Option<f64> {
        match name {
            "age" => Some(self.ages[i]),
            "z" => Some(self.infection[i] as f64),
            _ => self.attrs.get(name).map(|c| c.value(i)),
        }
    }

    pub fn has_attr(&self, name: &str) -> bool {
        matches!(name, "age" | "z") || self.attrs.contains_key(name)
    }

    /// Level codes and level names for a categorical attribute. Numeric
    /// columns qualify when every value is a small non-negative integer.
    pub fn categorical(&self, name: &str) -> Result<(Vec<u32>, Vec<String>)> {
        match name {
            "z" => Ok((
                self.infection.iter().map(|&z| z as u32).collect(),
                vec!["0".to_string(), "1".to_string()],
            )),
            "age" => Err(Error::NotCategorical(name.to_string())),
            _ => match self.attrs.get(name) {
                None => Err(Error::UnknownAttribute(name.to_string())),
                Some(AttrColumn::Categorical { codes, levels }) => {
                    Ok((codes.clone(), levels.clone()))
                }
                Some(AttrColumn::Numeric(values)) => {
                    let integral = values
                        .iter()
                        .all(|v| v.fract() == 0.0 && *v >= 0.0 && *v <= 1024.0);
                    if !integral {
                        return Err(Error::NotCategorical(name.to_string()));
                    }
                    let codes: Vec<u32> = values.iter().map(|&v| v as u32).collect();
                    let max = codes.iter().copied().max().unwrap_or(0);
                    Ok((codes, (0..=max).map(|k| k.to_string()).collect()))
                }
            },
        }
    }

    pub fn group_degrees(&self, i: usize, attr: &str) -> Result<GroupDegrees> {
        self.check(i)?;
        let (codes, levels) = self.categorical(attr)?;
        let mut counts = vec![0usize; levels.len()];
        for &j in &self.neighbors[i] {
            counts[codes[j] as usize] += 1;
        }
        Ok(GroupDegrees {
            node: i,
            attr: attr.to_string(),
            levels,
            counts,
        })
    }

    /// Cross-group tie counts `(t01, t10)` over ordered pairs.
    pub fn cross_group_ties(&self) -> (u64, u64) {
        let z = &self.infection;
        let mut t01 = 0u64;
        let mut t10 = 0u64;
        for (i, row) in self.neighbors.iter().enumerate() {
            for &j in row {
                if z[i] == 0 && z[j] == 1 {
                    t01 += 1;
                } else if z[i] == 1 && z[j] == 0 {
                    t10 += 1;
                }
            }
        }
        (t01, t10)
    }

    pub fn true_prevalence(&self) -> f64 {
        if self.n() == 0 {
            return 0.0;
        }
        self.infection.iter().map(|&z| z as f64).sum::<f64>() / self.n() as f64
    }

    /// Dense 0/1 adjacency for small test networks (n ≤ 200).
    pub fn dense_adjacency(&self) -> Result<Vec<Vec<u8>>> {
        if self.n() > 200 {
            return Err(Error::Config(format!(
                "dense view limited to n <= 200, got {}",
                self.n()
            )));
        }
        let mut m = vec![vec![0u8; self.n()]; self.n()];
        for (i, j) in self.edges() {
            m[i][j] = 1;
            m[j][i] = 1;
        }
        Ok(m)
    }

    /// Connected components count (used for the connectivity warning).
    pub fn component_count(&self) -> usize {
        let n = self.n();
        let mut seen = vec![false; n];
        let mut stack = Vec::new();
        let mut components = 0;
        for s in 0..n {
            if seen[s] {
                continue;
            }
            components += 1;
            seen[s] = true;
            stack.push(s);
            while let Some(u) = stack.pop() {
                for &v in &self.neighbors[u] {
                    if !seen[v] {
                        seen[v] = true;
                        stack.push(v);
                    }
                }
            }
        }
        components
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path4() -> Population {
        Population::from_edges(vec![20.0; 4], vec![0, 1, 0, 1], &[(0, 1), (1, 2), (2, 3)]).unwrap()
    }

    fn complete(n: usize) -> Population {
        let edges: Vec<_> = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .collect();
        Population::from_edges(vec![30.0; n], vec![0; n], &edges).unwrap()
    }

    #[test]
    fn degree_cases() {
        let p = Population::from_edges(vec![20.0; 3], vec![0; 3], &[(0, 1)]).unwrap();
        assert_eq!(p.degree(2).unwrap(), 0);
        let k5 = complete(5);
        assert!((0..5).all(|i| k5.degree(i).unwrap() == 4));
        let path = path4();
        assert_eq!(path.degree(0).unwrap(), 1);
        assert_eq!(path.degree(1).unwrap(), 2);
        assert!(matches!(
            path.degree(4),
            Err(Error::Index { index: 4, n: 4 })
        ));
    }

    #[test]
    fn group_degrees_counts_levels() {
        let p = Population::from_edges(vec![20.0; 4], vec![0, 1, 1, 0], &[(0, 1), (0, 2), (0, 3)])
            .unwrap();
        let g = p.group_degrees(0, "z").unwrap();
        assert_eq!(g.count("1"), 2);
        assert_eq!(g.count("0"), 1);
        assert_eq!(g.total(), 3);
        let lonely = Population::from_edges(vec![20.0; 2], vec![0, 1], &[]).unwrap();
        assert_eq!(lonely.group_degrees(0, "z").unwrap().counts, vec![0, 0]);
        assert!(matches!(
            p.group_degrees(0, "nope"),
            Err(Error::UnknownAttribute(_))
        ));
        assert!(matches!(
            p.group_degrees(0, "age"),
            Err(Error::NotCategorical(_))
        ));
    }

    #[test]
    fn cross_ties_small_cases() {
        let none = Population::from_edges(vec![20.0; 3], vec![0; 3], &[(0, 1), (1, 2)]).unwrap();
        assert_eq!(none.cross_group_ties(), (0, 0));
        let one = Population::from_edges(vec![20.0; 2], vec![0, 1], &[(0, 1)]).unwrap();
        assert_eq!(one.cross_group_ties(), (1, 1));
    }

    #[test]
    fn prevalence() {
        let p = Population::from_edges(vec![20.0; 4], vec![1, 0, 0, 0], &[]).unwrap();
        assert_eq!(p.true_prevalence(), 0.25);
        let all = Population::from_edges(vec![20.0; 3], vec![1; 3], &[]).unwrap();
        assert_eq!(all.true_prevalence(), 1.0);
    }

    #[test]
    fn rejects_bad_edges() {
        assert!(Population::from_edges(vec![20.0; 2], vec![0; 2], &[(0, 0)]).is_err());
        assert!(Population::from_edges(vec![20.0; 2], vec![0; 2], &[(0, 1), (1, 0)]).is_err());
        assert!(Population::from_edges(vec![20.0; 2], vec![0; 2], &[(0, 2)]).is_err());
        assert!(Population::from_edges(vec![-1.0; 2], vec![0; 2], &[]).is_err());
        assert!(Population::from_edges(vec![20.0; 2], vec![0, 2], &[]).is_err());
    }

    #[test]
    fn tie_table_symmetry() {
        let mut t = TieTable::new();
        t.insert(0, 1, 2.5).unwrap();
        assert_eq!(t.get(1, 0), 2.5);
        assert!(t.insert(1, 0, 2.5).is_ok());
        assert!(t.insert(1, 0, 3.0).is_err());
        assert_eq!(t.get(0, 2), 0.0);
    }
}
