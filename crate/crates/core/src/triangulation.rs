//! Causal triangulations and their tree encoding.
//!
//! A triangulation of the cylinder of height `h` is stored combinatorially:
//! the boundary length `k_i` of every slice and, for each slice below the top,
//! the cyclic sequence of forward (upward) degrees of its vertices. The marked
//! root sits on slice 0. Each vertex keeps `d - 1` children once its leftmost
//! upward edge is dropped, so `sum_j (d_{i,j} - 1) = k_{i+1}`.
//!
//! Tree generation `g + 1` corresponds to slice `g`; generation 0 is the
//! auxiliary vertex attached below slice 0.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trees::FamilyForest;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CausalTriangulation {
    pub slices: Vec<u64>,
    pub degrees: Vec<Vec<u32>>,
    pub root: usize,
}

impl CausalTriangulation {
    pub fn new(slices: Vec<u64>, degrees: Vec<Vec<u32>>, root: usize) -> Result<Self> {
        let ct = Self {
            slices,
            degrees,
            root,
        };
        ct.validate()?;
        Ok(ct)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::MalformedTriangulation(msg));
        if self.slices.is_empty() {
            return bad("no slices".into());
        }
        if let Some(i) = self.slices.iter().position(|&k| k == 0) {
            return bad(format!("slice {i} is empty"));
        }
        if self.degrees.len() + 1 != self.slices.len() {
            return bad(format!(
                "{} degree sequences for {} slices",
                self.degrees.len(),
                self.slices.len()
            ));
        }
        if self.root as u64 >= self.slices[0] {
            return bad(format!("root {} outside slice 0", self.root));
        }
        for (i, seq) in self.degrees.iter().enumerate() {
            if seq.len() as u64 != self.slices[i] {
                return bad(format!(
                    "slice {i} has {} vertices but {} forward degrees",
                    self.slices[i],
                    seq.len()
                ));
            }
            if seq.contains(&0) {
                return bad(format!("zero forward degree on slice {i}"));
            }
            let kept: u64 = seq.iter().map(|&d| u64::from(d) - 1).sum();
            if kept != self.slices[i + 1] {
                return bad(format!(
                    "forward degrees on slice {i} reach {kept} vertices, slice {} has {}",
                    i + 1,
                    self.slices[i + 1]
                ));
            }
        }
        Ok(())
    }

    pub fn height(&self) -> usize {
        self.slices.len() - 1
    }

    /// Representative with the root at position 0 of slice 0; rotating slice
    /// `i` by `o` rotates slice `i + 1` by the number of children of the first
    /// `o` vertices.
    pub fn canonical(&self) -> Self {
        let mut offset = self.root;
        let degrees = self
            .degrees
            .iter()
            .zip(&self.slices[1..])
            .map(|(seq, &next)| {
                let mut rotated = seq.clone();
                rotated.rotate_left(offset);
                let shift: u64 = seq[..offset].iter().map(|&d| u64::from(d) - 1).sum();
                offset = (shift % next) as usize;
                rotated
            })
            .collect();
        Self {
            slices: self.slices.clone(),
            degrees,
            root: 0,
        }
    }

    /// Slices `0..=g` and the strips between them.
    pub fn truncate(&self, g: usize) -> Result<Self> {
        if g > self.height() {
            return Err(Error::OutOfRange {
                what: "truncation height",
                value: g,
                max: self.height(),
            });
        }
        Ok(Self {
            slices: self.slices[..=g].to_vec(),
            degrees: self.degrees[..g].to_vec(),
            root: self.root,
        })
    }

    /// Number of triangles between slices 0 and `t`:
    /// `k_0 + 2(k_1 + ... + k_{t-1}) + k_t`, and 0 for `t = 0`.
    pub fn area(&self, t: usize) -> Result<u64> {
        if t > self.height() {
            return Err(Error::OutOfRange {
                what: "area height",
                value: t,
                max: self.height(),
            });
        }
        Ok(area_from_lengths(&self.slices[..=t]))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("plain data serialises")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ct: Self = serde_json::from_str(text)
            .map_err(|e| Error::MalformedTriangulation(format!("bad JSON: {e}")))?;
        ct.validate()?;
        Ok(ct)
    }
}

/// `alpha_t` for boundary lengths `k_0..=k_t`.
pub fn area_from_lengths(k: &[u64]) -> u64 {
    match k {
        [] | [_] => 0,
        [first, inner @ .., last] => first + 2 * inner.iter().sum::<u64>() + last,
    }
}

/// Tree encoding: a single-root tree of height `h + 1`.
pub fn ct_to_tree(ct: &CausalTriangulation) -> Result<FamilyForest> {
    ct.validate()?;
    let canon = ct.canonical();
    let mut children = Vec::with_capacity(canon.height() + 1);
    children.push(vec![canon.slices[0] as u32]);
    children.extend(
        canon
            .degrees
            .iter()
            .map(|seq| seq.iter().map(|&d| d - 1).collect()),
    );
    FamilyForest::single(children)
}

/// Inverse of [`ct_to_tree`]; the tree must have a vertex in every generation.
pub fn tree_to_ct(tree: &FamilyForest) -> Result<CausalTriangulation> {
    if tree.roots() != 1 {
        return Err(Error::MalformedForest("encoding needs a single root".into()));
    }
    if tree.height() == 0 {
        return Err(Error::MalformedForest(
            "a height-0 tree encodes no triangulation".into(),
        ));
    }
    let sizes = tree.generation_sizes();
    let slices = sizes.0[1..].to_vec();
    let degrees = tree.children()[1..]
        .iter()
        .map(|gen| gen.iter().map(|&c| c + 1).collect())
        .collect();
    CausalTriangulation::new(slices, degrees, 0)
}

/// Triangles of the disc obtained by capping slice 0 with the root:
/// `1 + 2 sum_{k=1}^{h-1} Z_k + Z_h`.
pub fn triangle_count_disc(tree: &FamilyForest) -> Result<u64> {
    if tree.roots() != 1 || tree.height() == 0 {
        return Err(Error::MalformedForest(
            "disc triangle count needs a single-root tree of height >= 1".into(),
        ));
    }
    let z = tree.generation_sizes().0;
    let h = tree.height();
    Ok(1 + 2 * z[1..h].iter().sum::<u64>() + z[h])
}

/// Unnormalised Gibbs log-weight `-lambda_bare * H`.
pub fn gibbs_log_weight(tree: &FamilyForest, lambda_bare: f64) -> Result<f64> {
    Ok(-lambda_bare * triangle_count_disc(tree)? as f64)
}

/// Law of `Z_1` under the Gibbs measure on discs of height exactly `h`.
#[derive(Debug, Clone, PartialEq)]
pub struct GibbsFirstGeneration {
    /// `law[k] = P_h(Z_1 = k)` for `k = 0..=c_max`.
    pub law: Vec<f64>,
    /// Total variation to the size-biased geometric law `k 2^-(k+1)`, the
    /// first-generation law of the UICT.
    pub tv_to_uict: f64,
    /// Mass of the UICT law beyond the offspring cap.
    pub truncation_deficit: f64,
}

/// Exact `Z_1` law of the Gibbs measure `exp(-lambda_bare H)` over single-root
/// trees of height exactly `h` with every child count at most `c_max`.
///
/// Vertices at depths `1..h` weigh `exp(-2 lambda_bare)`, depth-`h` vertices
/// and the root weigh `exp(-lambda_bare)`; subtree weights are summed from the
/// top generation down, once with and once without the height-`h` vertices.
pub fn gibbs_first_generation(lambda_bare: f64, h: usize, c_max: u32) -> Result<GibbsFirstGeneration> {
    if h == 0 {
        return Err(Error::InvalidArgument("Gibbs disc needs height >= 1".into()));
    }
    let inner = (-2.0 * lambda_bare).exp();
    let top = (-lambda_bare).exp();
    let power_sum = |x: f64| (0..=c_max).map(|c| x.powi(c as i32)).sum::<f64>();
    // Weight of a depth-d subtree: all of them, and those not reaching depth h.
    let (mut all, mut short) = (top, 0.0);
    for _ in 1..h {
        all = inner * power_sum(all);
        short = inner * power_sum(short);
    }
    let raw: Vec<f64> = (0..=c_max as i32)
        .map(|k| all.powi(k) - short.powi(k))
        .collect();
    let total: f64 = raw.iter().sum();
    let law: Vec<f64> = raw.iter().map(|w| w / total).collect();

    let uict = |k: usize| k as f64 * 0.5f64.powi(k as i32 + 1);
    let kept: f64 = (0..=c_max as usize).map(uict).sum();
    let truncation_deficit = 1.0 - kept;
    let tv_to_uict = 0.5
        * (law
            .iter()
            .enumerate()
            .map(|(k, p)| (p - uict(k)).abs())
            .sum::<f64>()
            + truncation_deficit);
    Ok(GibbsFirstGeneration {
        law,
        tv_to_uict,
        truncation_deficit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::offspring::OffspringDistribution;
    use crate::rng::rng_from_seed;
    use crate::trees::{enumerate_trees, sample_conditioned};

    #[test]
    fn smallest_cylinder() {
        let ct = CausalTriangulation::new(vec![1, 1], vec![vec![2]], 0).unwrap();
        let tree = ct_to_tree(&ct).unwrap();
        assert_eq!(tree.generation_sizes().0, vec![1, 1, 1]);
        assert_eq!(tree.height(), 2);
    }

    #[test]
    fn counts_forced_by_bijection() {
        let ct = CausalTriangulation::new(vec![2, 3], vec![vec![3, 2]], 0).unwrap();
        let tree = ct_to_tree(&ct).unwrap();
        let z = tree.generation_sizes().0;
        assert_eq!(z, vec![1, 2, 3]);
        assert_eq!(tree.children()[1].iter().sum::<u32>(), 3);
    }

    #[test]
    fn tree_profile_to_slices() {
        let tree = FamilyForest::single(vec![vec![2], vec![1, 2]]).unwrap();
        assert_eq!(tree_to_ct(&tree).unwrap().slices, vec![2, 3]);
        let chain = FamilyForest::single(vec![vec![1], vec![1]]).unwrap();
        assert_eq!(tree_to_ct(&chain).unwrap().slices, vec![1, 1]);
        assert!(tree_to_ct(&FamilyForest::single(vec![]).unwrap()).is_err());
    }

    #[test]
    fn malformed_inputs() {
        assert!(CausalTriangulation::new(vec![1, 1], vec![vec![0]], 0).is_err());
        assert!(CausalTriangulation::new(vec![1, 0], vec![vec![1]], 0).is_err());
        assert!(CausalTriangulation::new(vec![2, 1], vec![vec![2, 2]], 0).is_err());
        assert!(CausalTriangulation::new(vec![2], vec![], 2).is_err());
        assert!(CausalTriangulation::new(vec![], vec![], 0).is_err());
        // Extinct generation: no slice to map to.
        let extinct = FamilyForest::single(vec![vec![1], vec![0]]).unwrap();
        assert!(tree_to_ct(&extinct).is_err());
    }

    #[test]
    fn round_trip_small_trees() {
        let d = OffspringDistribution::geometric();
        for h in 1..=3 {
            for (tree, _) in enumerate_trees(&d, h, 2) {
                if tree.generation_sizes().0.contains(&0) {
                    continue;
                }
                let ct = tree_to_ct(&tree).unwrap();
                assert_eq!(ct_to_tree(&ct).unwrap(), tree);
                assert_eq!(tree_to_ct(&ct_to_tree(&ct).unwrap()).unwrap(), ct);
            }
        }
    }

    #[test]
    fn canonical_rotation() {
        // Root at position 1: vertex 0 has one child, so slice 1 rotates by 1.
        let ct = CausalTriangulation::new(vec![2, 3], vec![vec![2, 3]], 1).unwrap();
        let canon = ct.canonical();
        assert_eq!(canon.degrees, vec![vec![3, 2]]);
        assert_eq!(canon.root, 0);

        let ct = CausalTriangulation::new(vec![2, 3, 2], vec![vec![2, 3], vec![2, 1, 2]], 1)
            .unwrap();
        let canon = ct.canonical();
        assert_eq!(canon.degrees, vec![vec![3, 2], vec![1, 2, 2]]);
        canon.validate().unwrap();
        assert_eq!(canon.canonical(), canon);
    }

    #[test]
    fn area_values() {
        let ct = CausalTriangulation::new(vec![2, 3, 1], vec![vec![2, 3], vec![1, 2, 1]], 0)
            .unwrap();
        assert_eq!(ct.area(2).unwrap(), 9);
        assert_eq!(ct.area(1).unwrap(), 5);
        assert_eq!(ct.area(0).unwrap(), 0);
        assert!(ct.area(3).is_err());
    }

    #[test]
    fn area_agrees_with_profile() {
        let d = OffspringDistribution::geometric();
        let mut rng = rng_from_seed(21);
        for _ in 0..500 {
            let tree = sample_conditioned(&d, 9, 1, &mut rng);
            let ct = tree_to_ct(&tree).unwrap();
            let z = tree.generation_sizes().0;
            for t in 0..=ct.height() {
                // slice t is generation t + 1
                let want = if t == 0 {
                    0
                } else {
                    z[1] + 2 * z[2..=t].iter().sum::<u64>() + z[t + 1]
                };
                assert_eq!(ct.area(t).unwrap(), want);
            }
        }
    }

    #[test]
    fn disc_triangles() {
        let star = FamilyForest::single(vec![vec![3]]).unwrap();
        assert_eq!(triangle_count_disc(&star).unwrap(), 4);
        let t = FamilyForest::single(vec![vec![2], vec![1, 2]]).unwrap();
        assert_eq!(triangle_count_disc(&t).unwrap(), 8);
        let chain = FamilyForest::single(vec![vec![1], vec![1]]).unwrap();
        assert_eq!(triangle_count_disc(&chain).unwrap(), 4);
    }

    #[test]
    fn gibbs_weights() {
        let a = FamilyForest::single(vec![vec![3]]).unwrap();
        let b = FamilyForest::single(vec![vec![2], vec![1, 2]]).unwrap();
        assert_eq!(gibbs_log_weight(&a, 0.0).unwrap(), 0.0);
        let ln2 = std::f64::consts::LN_2;
        assert!((gibbs_log_weight(&a, ln2).unwrap() + 4.0 * ln2).abs() < 1e-15);
        let diff = gibbs_log_weight(&b, 0.7).unwrap() - gibbs_log_weight(&a, 0.7).unwrap();
        assert!((diff + 0.7 * 4.0).abs() < 1e-12);
    }

    #[test]
    fn gibbs_law_matches_enumeration() {
        // Brute force over all height-h trees with child counts <= c_max.
        let d = OffspringDistribution::geometric();
        let lambda = 0.9;
        for (h, c_max) in [(1usize, 4u32), (2, 3), (3, 2)] {
            let mut law = vec![0.0; c_max as usize + 1];
            for (tree, _) in enumerate_trees(&d, h, c_max) {
                if *tree.generation_sizes().0.last().unwrap() == 0 {
                    continue;
                }
                law[tree.children()[0][0] as usize] +=
                    gibbs_log_weight(&tree, lambda).unwrap().exp();
            }
            let total: f64 = law.iter().sum();
            let exact = gibbs_first_generation(lambda, h, c_max).unwrap();
            for (k, w) in law.iter().enumerate() {
                assert!((w / total - exact.law[k]).abs() < 1e-12, "h={h} k={k}");
            }
        }
    }

    #[test]
    fn gibbs_at_ln2_approaches_uict() {
        let ln2 = std::f64::consts::LN_2;
        let tv: Vec<f64> = [3, 5, 8]
            .iter()
            .map(|&h| gibbs_first_generation(ln2, h, 6).unwrap())
            .map(|g| {
                assert!((g.truncation_deficit - 0.0625).abs() < 1e-12);
                g.tv_to_uict
            })
            .collect();
        assert!(tv[0] > tv[1] && tv[1] > tv[2], "{tv:?}");
    }

    #[test]
    fn json_round_trip() {
        let ct = CausalTriangulation::new(vec![2, 3, 1], vec![vec![2, 3], vec![1, 2, 1]], 1)
            .unwrap();
        let text = ct.to_json();
        assert_eq!(text, r#"{"slices":[2,3,1],"degrees":[[2,3],[1,2,1]],"root":1}"#);
        let back = CausalTriangulation::from_json(&text).unwrap();
        assert_eq!(back, ct);
        assert_eq!(back.to_json(), text);
        assert!(CausalTriangulation::from_json(r#"{"slices":[1],"degrees":[],"root":3}"#).is_err());
    }
}
