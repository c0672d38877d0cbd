//! Family forests in Ulam–Harris form.
//!
//! A forest is stored generation by generation: `children[g][i]` is the child
//! count of the `i`-th vertex of generation `g`, vertices within a generation
//! being in lexicographic address order. Addresses are recovered from prefix
//! sums, so predecessor-closure holds by construction. A forest of height `h`
//! stores child counts for depths `0..h`; the vertices at depth `h` are the
//! frontier of the restriction.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::offspring::OffspringDistribution;

/// Ulam–Harris address: root index (0-based) followed by 1-based child indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Address {
    pub root: usize,
    pub path: Vec<u32>,
}

impl Address {
    pub fn depth(&self) -> usize {
        self.path.len()
    }

    pub fn parent(&self) -> Option<Address> {
        let mut path = self.path.clone();
        path.pop().map(|_| Address {
            root: self.root,
            path,
        })
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.root)?;
        for j in &self.path {
            write!(f, ".{j}")?;
        }
        Ok(())
    }
}

impl FromStr for Address {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let mut parts = s.split('.');
        let root = parts
            .next()
            .ok_or("empty address")?
            .parse()
            .map_err(|e| format!("bad root index in {s:?}: {e}"))?;
        let path = parts
            .map(|p| match p.parse::<u32>() {
                Ok(0) => Err(format!("child indices start at 1 in {s:?}")),
                Ok(j) => Ok(j),
                Err(e) => Err(format!("bad child index in {s:?}: {e}")),
            })
            .collect::<std::result::Result<_, _>>()?;
        Ok(Address { root, path })
    }
}

/// Generation sizes `[Z_0, ..., Z_h]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenerationProfile(pub Vec<u64>);

impl GenerationProfile {
    pub fn sizes(&self) -> &[u64] {
        &self.0
    }

    pub fn total(&self) -> u64 {
        self.0.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FamilyForest {
    roots: usize,
    children: Vec<Vec<u32>>,
    /// Index of the spine vertex within each generation `0..=h`.
    spine: Option<Vec<usize>>,
}

impl FamilyForest {
    /// Validate and assemble a forest from per-generation child counts.
    pub fn from_generations(
        roots: usize,
        children: Vec<Vec<u32>>,
        spine: Option<Vec<usize>>,
    ) -> Result<Self> {
        if roots == 0 {
            return Err(Error::MalformedForest("a forest needs at least one root".into()));
        }
        let mut width = roots as u64;
        for (g, gen) in children.iter().enumerate() {
            if gen.len() as u64 != width {
                return Err(Error::MalformedForest(format!(
                    "generation {g} has {} child counts for {width} vertices",
                    gen.len()
                )));
            }
            width = gen.iter().map(|&c| u64::from(c)).sum();
        }
        let forest = Self {
            roots,
            children,
            spine: None,
        };
        if let Some(spine) = spine {
            forest.check_spine(&spine)?;
            return Ok(Self {
                spine: Some(spine),
                ..forest
            });
        }
        Ok(forest)
    }

    fn check_spine(&self, spine: &[usize]) -> Result<()> {
        if spine.len() != self.height() + 1 {
            return Err(Error::MalformedForest(format!(
                "spine has {} vertices for height {}",
                spine.len(),
                self.height()
            )));
        }
        let sizes = self.generation_sizes();
        for (g, &v) in spine.iter().enumerate() {
            if v as u64 >= sizes.0[g] {
                return Err(Error::MalformedForest(format!(
                    "spine vertex {v} missing from generation {g}"
                )));
            }
            if g > 0 && self.parent_index(g, v) != spine[g - 1] {
                return Err(Error::MalformedForest(format!(
                    "spine vertex in generation {g} is not a child of the previous one"
                )));
            }
        }
        Ok(())
    }

    /// Single root with the given child counts per generation.
    pub fn single(children: Vec<Vec<u32>>) -> Result<Self> {
        Self::from_generations(1, children, None)
    }

    pub fn roots(&self) -> usize {
        self.roots
    }

    pub fn height(&self) -> usize {
        self.children.len()
    }

    pub fn children(&self) -> &[Vec<u32>] {
        &self.children
    }

    pub fn spine(&self) -> Option<&[usize]> {
        self.spine.as_deref()
    }

    /// Child count of vertex `i` of generation `g < height`.
    pub fn child_count(&self, g: usize, i: usize) -> u32 {
        self.children[g][i]
    }

    pub fn generation_sizes(&self) -> GenerationProfile {
        let mut sizes = Vec::with_capacity(self.height() + 1);
        sizes.push(self.roots as u64);
        sizes.extend(
            self.children
                .iter()
                .map(|gen| gen.iter().map(|&c| u64::from(c)).sum::<u64>()),
        );
        GenerationProfile(sizes)
    }

    pub fn vertex_count(&self) -> u64 {
        self.generation_sizes().total()
    }

    /// Index in generation `g - 1` of the parent of vertex `i` of generation `g`.
    pub fn parent_index(&self, g: usize, i: usize) -> usize {
        assert!(g > 0, "roots have no parent");
        let mut seen = 0usize;
        for (p, &c) in self.children[g - 1].iter().enumerate() {
            seen += c as usize;
            if i < seen {
                return p;
            }
        }
        panic!("vertex {i} not in generation {g}");
    }

    /// Ulam–Harris address of vertex `i` of generation `g`.
    pub fn address(&self, g: usize, i: usize) -> Address {
        let mut path = Vec::with_capacity(g);
        let mut idx = i;
        for depth in (1..=g).rev() {
            let parent = self.parent_index(depth, idx);
            let first: usize = self.children[depth - 1][..parent]
                .iter()
                .map(|&c| c as usize)
                .sum();
            path.push((idx - first + 1) as u32);
            idx = parent;
        }
        path.reverse();
        Address { root: idx, path }
    }

    /// `r_g`: all vertices of depth at most `g`.
    pub fn restrict(&self, g: usize) -> Result<Self> {
        if g > self.height() {
            return Err(Error::OutOfRange {
                what: "restriction height",
                value: g,
                max: self.height(),
            });
        }
        Ok(Self {
            roots: self.roots,
            children: self.children[..g].to_vec(),
            spine: self.spine.as_ref().map(|s| s[..=g].to_vec()),
        })
    }

    /// Drop the spine marking.
    pub fn without_spine(&self) -> Self {
        Self {
            spine: None,
            ..self.clone()
        }
    }

    /// Line-oriented text form: header lines `roots m` and `height h`, then one
    /// vertex per line `address c_v`, with `-` for frontier vertices and a
    /// trailing `*` on spine vertices.
    pub fn to_text(&self) -> String {
        let mut out = format!("roots {}\nheight {}\n", self.roots, self.height());
        let sizes = self.generation_sizes();
        for g in 0..=self.height() {
            for i in 0..sizes.0[g] as usize {
                out.push_str(&self.address(g, i).to_string());
                if g < self.height() {
                    out.push_str(&format!(" {}", self.children[g][i]));
                } else {
                    out.push_str(" -");
                }
                if self.spine.as_ref().is_some_and(|s| s[g] == i) {
                    out.push_str(" *");
                }
                out.push('\n');
            }
        }
        out
    }

    pub fn parse_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let mut header = |key: &str| -> Result<usize> {
            let (line, l) = lines.next().ok_or(Error::Parse {
                line: 0,
                msg: format!("missing `{key}` header"),
            })?;
            l.strip_prefix(key)
                .and_then(|v| v.trim().parse().ok())
                .ok_or(Error::Parse {
                    line,
                    msg: format!("expected `{key} <n>`"),
                })
        };
        let roots = header("roots")?;
        let height = header("height")?;
        if roots == 0 {
            return Err(Error::MalformedForest("a forest needs at least one root".into()));
        }

        let mut partial = Self {
            roots,
            children: Vec::with_capacity(height),
            spine: None,
        };
        let mut spine: Vec<Option<usize>> = vec![None; height + 1];
        let mut width = roots;
        for g in 0..=height {
            let mut gen = Vec::with_capacity(width);
            for i in 0..width {
                let (line, l) = lines.next().ok_or(Error::Parse {
                    line: 0,
                    msg: format!("generation {g} ends after {i} of {width} vertices"),
                })?;
                let err = |msg: String| Error::Parse { line, msg };
                let (addr, count, star) = match l.split_whitespace().collect::<Vec<_>>()[..] {
                    [a, c] => (a, c, false),
                    [a, c, "*"] => (a, c, true),
                    _ => return Err(err(format!("expected `address count [*]`, got {l:?}"))),
                };
                let addr: Address = addr.parse().map_err(err)?;
                let want = partial.address(g, i);
                if addr != want {
                    return Err(err(format!("vertex {addr} out of order, expected {want}")));
                }
                if g < height {
                    gen.push(
                        count
                            .parse::<u32>()
                            .map_err(|e| err(format!("bad child count {count:?}: {e}")))?,
                    );
                } else if count != "-" {
                    return Err(err("frontier vertices carry `-` as child count".into()));
                }
                if star && spine[g].replace(i).is_some() {
                    return Err(err(format!("two spine vertices in generation {g}")));
                }
            }
            if g < height {
                width = gen.iter().map(|&c| c as usize).sum();
                partial.children.push(gen);
            }
        }
        if let Some((line, _)) = lines.next() {
            return Err(Error::Parse {
                line,
                msg: "more vertices than the declared height allows".into(),
            });
        }
        let spine = if spine.iter().any(Option::is_some) {
            Some(
                spine
                    .into_iter()
                    .collect::<Option<Vec<_>>>()
                    .ok_or(Error::MalformedForest("spine misses a generation".into()))?,
            )
        } else {
            None
        };
        Self::from_generations(roots, partial.children, spine)
    }
}

/// Unconditioned GW tree restricted to height `h`.
pub fn sample_gw<R: Rng + ?Sized>(d: &OffspringDistribution, h: usize, rng: &mut R) -> FamilyForest {
    let mut children = Vec::with_capacity(h);
    let mut width = 1u64;
    for _ in 0..h {
        let gen: Vec<u32> = (0..width).map(|_| d.sample(rng) as u32).collect();
        width = gen.iter().map(|&c| u64::from(c)).sum();
        children.push(gen);
    }
    FamilyForest {
        roots: 1,
        children,
        spine: None,
    }
}

/// GW forest of `m0` roots conditioned on non-extinction, restricted to height
/// `h`, with its spine.
///
/// One root, chosen uniformly, carries the spine. In each generation the spine
/// vertex reproduces by the size-biased law, every other vertex by `p`, and the
/// next spine vertex is uniform among the spine vertex's children.
pub fn sample_conditioned<R: Rng + ?Sized>(
    d: &OffspringDistribution,
    h: usize,
    m0: usize,
    rng: &mut R,
) -> FamilyForest {
    assert!(m0 >= 1, "need at least one root");
    let mut spine = Vec::with_capacity(h + 1);
    let mut current = rng.random_range(0..m0);
    spine.push(current);
    let mut children = Vec::with_capacity(h);
    let mut width = m0 as u64;
    for _ in 0..h {
        let mut gen = Vec::with_capacity(width as usize);
        let mut before = 0u64;
        for i in 0..width as usize {
            let c = if i == current {
                d.sample_size_biased(rng)
            } else {
                d.sample(rng)
            };
            if i < current {
                before += c;
            }
            gen.push(c as u32);
        }
        let own = u64::from(gen[current]);
        current = (before + rng.random_range(0..own)) as usize;
        spine.push(current);
        width = gen.iter().map(|&c| u64::from(c)).sum();
        children.push(gen);
    }
    FamilyForest {
        roots: m0,
        children,
        spine: Some(spine),
    }
}

/// All single-root trees of height `h` whose child counts at depth `< h` are
/// at most `c_max`, each with its GW probability `P(r_h G = tau)`.
pub fn enumerate_trees(
    d: &OffspringDistribution,
    h: usize,
    c_max: u32,
) -> Vec<(FamilyForest, f64)> {
    let mut out = Vec::new();
    for_each_tree(d, h, c_max, |tree, p| out.push((tree.clone(), p)));
    out
}

/// Visit the trees of [`enumerate_trees`] without collecting them.
pub fn for_each_tree<F: FnMut(&FamilyForest, f64)>(
    d: &OffspringDistribution,
    h: usize,
    c_max: u32,
    mut visit: F,
) {
    let mut tree = FamilyForest {
        roots: 1,
        children: Vec::with_capacity(h),
        spine: None,
    };
    extend_generations(d, h, c_max, 1, 1.0, &mut tree, &mut visit);
}

fn extend_generations<F: FnMut(&FamilyForest, f64)>(
    d: &OffspringDistribution,
    h: usize,
    c_max: u32,
    width: usize,
    prob: f64,
    tree: &mut FamilyForest,
    visit: &mut F,
) {
    if tree.children.len() == h {
        visit(tree, prob);
        return;
    }
    let mut gen = vec![0u32; width];
    loop {
        let p: f64 = gen.iter().map(|&c| d.pmf(c as usize)).product();
        let next = gen.iter().map(|&c| c as usize).sum();
        tree.children.push(gen.clone());
        extend_generations(d, h, c_max, next, prob * p, tree, visit);
        tree.children.pop();
        // odometer
        let Some(pos) = gen.iter().rposition(|&c| c < c_max) else {
            return;
        };
        gen[pos] += 1;
        for c in &mut gen[pos + 1..] {
            *c = 0;
        }
    }
}

/// GW probability of the restriction, `prod_v p(c_v)` over depth `< h`.
pub fn gw_prob(d: &OffspringDistribution, tau: &FamilyForest) -> f64 {
    tau.children
        .iter()
        .flatten()
        .map(|&c| d.pmf(c as usize))
        .product()
}

/// `P(r_h G^inf = tau) = Z_h(tau) P(r_h G = tau)` for a single-root tree.
pub fn conditioned_prob(d: &OffspringDistribution, tau: &FamilyForest) -> f64 {
    let z_h = *tau.generation_sizes().0.last().expect("non-empty profile");
    z_h as f64 * gw_prob(d, tau)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use std::collections::HashMap;

    fn geo() -> OffspringDistribution {
        OffspringDistribution::geometric()
    }

    #[test]
    fn generation_sizes_small() {
        let chain = FamilyForest::single(vec![vec![1], vec![1]]).unwrap();
        assert_eq!(chain.generation_sizes().0, vec![1, 1, 1]);
        let star = FamilyForest::single(vec![vec![3]]).unwrap();
        assert_eq!(star.generation_sizes().0, vec![1, 3]);
    }

    #[test]
    fn rejects_inconsistent_generations() {
        assert!(FamilyForest::single(vec![vec![2], vec![1]]).is_err());
        assert!(FamilyForest::from_generations(0, vec![], None).is_err());
        assert!(FamilyForest::single(vec![vec![2]])
            .and_then(|_| FamilyForest::from_generations(1, vec![vec![2]], Some(vec![0, 2])))
            .is_err());
    }

    #[test]
    fn addresses() {
        let t = FamilyForest::single(vec![vec![2], vec![1, 3]]).unwrap();
        let addrs: Vec<String> = (0..4).map(|i| t.address(2, i).to_string()).collect();
        assert_eq!(addrs, ["0.1.1", "0.2.1", "0.2.2", "0.2.3"]);
        assert_eq!(t.address(1, 1).to_string(), "0.2");
        assert_eq!(t.address(2, 3).parent(), Some(t.address(1, 1)));
        assert_eq!("0.2.3".parse::<Address>().unwrap(), t.address(2, 3));
        assert!("0.0".parse::<Address>().is_err());
    }

    #[test]
    fn restriction() {
        let mut rng = rng_from_seed(1);
        let f = sample_conditioned(&geo(), 7, 2, &mut rng);
        assert_eq!(f.restrict(f.height()).unwrap(), f);
        assert_eq!(
            f.restrict(5).unwrap().restrict(3).unwrap(),
            f.restrict(3).unwrap()
        );
        let r0 = f.restrict(0).unwrap();
        assert_eq!(r0.generation_sizes().0, vec![2]);
        assert!(f.restrict(8).is_err());
    }

    #[test]
    fn gw_height_zero_and_one() {
        let mut rng = rng_from_seed(2);
        let t = sample_gw(&geo(), 0, &mut rng);
        assert_eq!(t.generation_sizes().0, vec![1]);

        let n = 100_000;
        let extinct = (0..n)
            .filter(|_| sample_gw(&geo(), 1, &mut rng).generation_sizes().0[1] == 0)
            .count();
        assert!((extinct as f64 / n as f64 - 0.5).abs() < 0.007);
    }

    #[test]
    fn gw_survival_to_fifty() {
        let mut rng = rng_from_seed(3);
        let n = 100_000;
        let alive = (0..n)
            .filter(|_| *sample_gw(&geo(), 50, &mut rng).generation_sizes().0.last().unwrap() > 0)
            .count();
        let p = 1.0 - geo().gf_iterate(0.0, 50);
        assert!((p - 1.0 / 51.0).abs() < 1e-15);
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((alive as f64 / n as f64 - p).abs() < 4.0 * se);
    }

    #[test]
    fn conditioned_first_generation() {
        let mut rng = rng_from_seed(4);
        let n = 200_000;
        let mut counts = HashMap::new();
        for _ in 0..n {
            let f = sample_conditioned(&geo(), 1, 1, &mut rng);
            *counts.entry(f.generation_sizes().0[1]).or_insert(0usize) += 1;
        }
        for (k, p) in [(1u64, 0.25), (2, 0.25), (3, 3.0 / 16.0)] {
            let freq = counts.get(&k).copied().unwrap_or(0) as f64 / n as f64;
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!((freq - p).abs() < 4.0 * se, "k={k}: {freq}");
        }
    }

    #[test]
    fn conditioned_two_roots_mean() {
        let mut rng = rng_from_seed(5);
        let n = 100_000;
        let xs: Vec<f64> = (0..n)
            .map(|_| sample_conditioned(&geo(), 1, 2, &mut rng).generation_sizes().0[1] as f64)
            .collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((mean - 4.0).abs() < 4.0 * (var / n as f64).sqrt(), "{mean}");
    }

    #[test]
    fn conditioned_samples_survive() {
        let mut rng = rng_from_seed(6);
        let d = OffspringDistribution::from_pmf(&[0.5, 0.0, 0.5]).unwrap();
        for _ in 0..2_000 {
            let f = sample_conditioned(&d, 12, 1, &mut rng);
            assert!(f.generation_sizes().0.iter().all(|&z| z >= 1));
            let profile = f.generation_sizes();
            assert_eq!(profile.total(), f.vertex_count());
            // The spine is consistent.
            FamilyForest::from_generations(1, f.children().to_vec(), f.spine().map(<[_]>::to_vec))
                .unwrap();
        }
    }

    #[test]
    fn enumeration_small() {
        let trees = enumerate_trees(&geo(), 1, 2);
        let probs: Vec<f64> = trees.iter().map(|(_, p)| *p).collect();
        assert_eq!(probs, vec![0.5, 0.25, 0.125]);
        let zero = enumerate_trees(&geo(), 0, 4);
        assert_eq!(zero.len(), 1);
        assert_eq!(zero[0].1, 1.0);
    }

    #[test]
    fn enumeration_mass_matches_truncated_gf() {
        // Truncated gf T(s) = sum_{c <= c_max} p(c) s^c; total mass is T_h(1).
        let d = geo();
        for (h, c_max) in [(1, 3), (2, 3), (2, 4), (3, 2)] {
            let mass: f64 = enumerate_trees(&d, h, c_max).iter().map(|(_, p)| p).sum();
            let trunc = |s: f64| (0..=c_max).map(|c| d.pmf(c as usize) * s.powi(c as i32)).sum::<f64>();
            let want = (0..h).fold(1.0, |s, _| trunc(s));
            assert!((mass - want).abs() < 1e-12, "h={h} c_max={c_max}");
        }
    }

    #[test]
    fn conditioned_prob_values() {
        let chain = FamilyForest::single(vec![vec![1]]).unwrap();
        assert_eq!(conditioned_prob(&geo(), &chain), 0.25);
        let cherry = FamilyForest::single(vec![vec![2]]).unwrap();
        assert_eq!(conditioned_prob(&geo(), &cherry), 0.25);
        let extinct = FamilyForest::single(vec![vec![1], vec![0]]).unwrap();
        assert_eq!(conditioned_prob(&geo(), &extinct), 0.0);
    }

    #[test]
    fn conditioned_normalisation_deficit() {
        // Closed form of the truncated mass at h = 2: the root has c0 <= c
        // children, each with at most c children, and Z_2 sums their counts.
        let oracle = |c: usize| -> f64 {
            let p = |k: usize| 0.5f64.powi(k as i32 + 1);
            let q: f64 = (0..=c).map(p).sum();
            let m: f64 = (0..=c).map(|k| k as f64 * p(k)).sum();
            (1..=c).map(|c0| c0 as f64 * p(c0) * m * q.powi(c0 as i32 - 1)).sum()
        };
        let d = geo();
        let mut previous = 0.0;
        for c_max in 4..=6u32 {
            let mass: f64 = enumerate_trees(&d, 2, c_max)
                .iter()
                .map(|(t, _)| conditioned_prob(&d, t))
                .sum();
            assert!((mass - oracle(c_max as usize)).abs() < 1e-12);
            assert!(mass > previous && mass < 1.0);
            previous = mass;
        }
        assert!((1.0 - oracle(6) - 0.132_337_974_225_635).abs() < 1e-12);
        let deficits: Vec<f64> = (6..=40).map(|c| 1.0 - oracle(c)).collect();
        assert!(deficits.windows(2).all(|w| w[1] < w[0]));
        assert!(deficits[4] < 0.02 && deficits[3] > 0.02);
        assert!(*deficits.last().unwrap() < 1e-9);
    }

    #[test]
    fn text_round_trip() {
        let mut rng = rng_from_seed(7);
        for m0 in 1..4 {
            let f = sample_conditioned(&geo(), 4, m0, &mut rng);
            let text = f.to_text();
            assert_eq!(FamilyForest::parse_text(&text).unwrap(), f);
            let plain = f.without_spine();
            assert_eq!(FamilyForest::parse_text(&plain.to_text()).unwrap(), plain);
        }
        let extinct = FamilyForest::single(vec![vec![1], vec![0], vec![]]).unwrap();
        assert_eq!(FamilyForest::parse_text(&extinct.to_text()).unwrap(), extinct);
    }

    #[test]
    fn text_format_shape() {
        let t = FamilyForest::from_generations(1, vec![vec![2]], Some(vec![0, 1])).unwrap();
        assert_eq!(t.to_text(), "roots 1\nheight 1\n0 2 *\n0.1 -\n0.2 - *\n");
        assert!(FamilyForest::parse_text("roots 1\nheight 1\n0 2\n0.2 -\n0.1 -\n").is_err());
        assert!(FamilyForest::parse_text("roots 1\nheight 1\n0 2\n0.1 -\n").is_err());
    }
}
