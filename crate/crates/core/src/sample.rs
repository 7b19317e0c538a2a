//! Deterministic sample-instance generators for tests and benchmarks.
//!
//! Everything here is seeded and platform-independent (SplitMix64 plus
//! Box-Muller), so the same seed always produces the same instance.
//! Coherent operators on coordinate spaces are drawn block-randomly with
//! respect to the coordinate-profile partition: coordinate `i` belongs to
//! the levels with `i < d_lambda`, and a matrix mixing only coordinates with
//! equal profiles reduces every level subspace together with its adjoint.

use std::collections::HashMap;
use std::sync::Arc;

use crate::algebra::LocallyCStarAlgebra;
use crate::kernel::{CpMap, OperatorKernel, SemigroupAction, StarSemigroup};
use crate::linalg::{c, zeros, CMatrix, CVector, C};
use crate::operator::LocallyBoundedOperator;
use crate::poset::DirectedPoset;
use crate::space::LocallyHilbertSpace;
use crate::tol::Tol;

/// SplitMix64: tiny, seedable, platform-independent.
#[derive(Debug, Clone)]
pub struct SampleRng {
    state: u64,
}

impl SampleRng {
    pub fn new(seed: u64) -> Self {
        SampleRng { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1).
    pub fn f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn usize_below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        (self.next_u64() % n as u64) as usize
    }

    /// Standard normal via Box-Muller.
    pub fn gaussian(&mut self) -> f64 {
        let u1 = (1.0 - self.f64()).max(f64::MIN_POSITIVE);
        let u2 = self.f64();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    pub fn complex_gaussian(&mut self) -> C {
        c(self.gaussian(), self.gaussian())
    }

    /// Random permutation of `0..n` (Fisher-Yates).
    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut p: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = self.usize_below(i + 1);
            p.swap(i, j);
        }
        p
    }
}

pub fn chain_poset(len: usize) -> Arc<DirectedPoset> {
    let labels: Vec<String> = (0..len).map(|i| format!("l{i}")).collect();
    let refs: Vec<&str> = labels.iter().map(|s| s.as_str()).collect();
    let pairs: Vec<(&str, &str)> = refs.windows(2).map(|w| (w[0], w[1])).collect();
    Arc::new(DirectedPoset::new(&refs, &pairs).unwrap())
}

pub fn diamond_poset() -> Arc<DirectedPoset> {
    Arc::new(
        DirectedPoset::new(
            &["a", "b", "c", "d"],
            &[("a", "b"), ("a", "c"), ("b", "d"), ("c", "d")],
        )
        .unwrap(),
    )
}

pub fn coordinate_space(poset: Arc<DirectedPoset>, dims: Vec<usize>) -> Arc<LocallyHilbertSpace> {
    Arc::new(LocallyHilbertSpace::coordinate(poset, dims, &Tol::default()).unwrap())
}

/// A random poset from the acceptance corpus: chains of length <= 4 and the
/// diamond, with monotone dims bounded by `max_dim`.
pub fn random_small_space(rng: &mut SampleRng, max_dim: usize) -> Arc<LocallyHilbertSpace> {
    let pick = rng.usize_below(5);
    let (poset, n_levels): (Arc<DirectedPoset>, usize) = match pick {
        0 => (chain_poset(1), 1),
        1 => (chain_poset(2), 2),
        2 => (chain_poset(3), 3),
        3 => (chain_poset(4), 4),
        _ => (diamond_poset(), 4),
    };
    let dims = monotone_dims(rng, &poset, n_levels, max_dim);
    coordinate_space(poset, dims)
}

fn monotone_dims(
    rng: &mut SampleRng,
    poset: &Arc<DirectedPoset>,
    n_levels: usize,
    max_dim: usize,
) -> Vec<usize> {
    // assign dims respecting the order: start everywhere at 1, then grow
    // upward-closed sets a few times
    let mut dims = vec![1usize; n_levels];
    let growth = rng.usize_below(max_dim);
    for _ in 0..growth {
        let e = rng.usize_below(n_levels);
        for (f, d) in dims.iter_mut().enumerate() {
            if poset.leq(e, f) && *d < max_dim {
                *d += 1;
            }
        }
    }
    dims
}

/// Coordinate-profile partition: groups of coordinates present in exactly
/// the same levels.
fn profile_groups(space: &LocallyHilbertSpace) -> Vec<Vec<usize>> {
    let d_top = space.top_dim();
    let mut groups: HashMap<Vec<bool>, Vec<usize>> = HashMap::new();
    for i in 0..d_top {
        let profile: Vec<bool> = (0..space.levels()).map(|l| i < space.dim(l)).collect();
        groups.entry(profile).or_default().push(i);
    }
    let mut out: Vec<Vec<usize>> = groups.into_values().collect();
    out.sort_by_key(|g| g[0]);
    out
}

/// Random coherent endomorphism of a coordinate space: complex Gaussian
/// blocks on the coordinate-profile partition.
pub fn random_coherent_endomorphism(
    space: &Arc<LocallyHilbertSpace>,
    rng: &mut SampleRng,
) -> LocallyBoundedOperator {
    let d = space.top_dim();
    let mut top = zeros(d, d);
    for group in profile_groups(space) {
        for &i in &group {
            for &j in &group {
                top[(i, j)] = rng.complex_gaussian();
            }
        }
    }
    LocallyBoundedOperator::from_top(space.clone(), space.clone(), top, &Tol::default())
        .expect("profile-block matrices are coherent on coordinate spaces")
}

/// Random PSD kernel `k(x,y) = F_x^* F_y` from random coherent blocks.
pub fn random_psd_kernel(
    space: &Arc<LocallyHilbertSpace>,
    n_points: usize,
    rng: &mut SampleRng,
) -> OperatorKernel {
    let factors: Vec<LocallyBoundedOperator> = (0..n_points)
        .map(|_| random_coherent_endomorphism(space, rng))
        .collect();
    let mut values = Vec::with_capacity(n_points * n_points);
    for x in &factors {
        for y in &factors {
            values.push(x.adjoint().compose(y).unwrap());
        }
    }
    let points = (0..n_points).map(|i| format!("x{}", i + 1)).collect();
    OperatorKernel::new(points, space.clone(), values).unwrap()
}

/// The cyclic group `Z/n` with `s* = s^{-1}`.
pub fn cyclic_group(n: usize) -> Arc<StarSemigroup> {
    let labels: Vec<String> = (0..n).map(|i| format!("g{i}")).collect();
    let mut mult = vec![0usize; n * n];
    for i in 0..n {
        for j in 0..n {
            mult[i * n + j] = (i + j) % n;
        }
    }
    let star: Vec<usize> = (0..n).map(|i| (n - i) % n).collect();
    Arc::new(StarSemigroup::new(labels, mult, star, Some(0)).unwrap())
}

/// The Klein four-group, every element its own inverse.
pub fn klein_four_group() -> Arc<StarSemigroup> {
    let labels = vec!["e".into(), "a".into(), "b".into(), "ab".into()];
    // xor-table on {0,1,2,3}
    let mut mult = vec![0usize; 16];
    for i in 0..4 {
        for j in 0..4 {
            mult[i * 4 + j] = i ^ j;
        }
    }
    let star = vec![0, 1, 2, 3];
    Arc::new(StarSemigroup::new(labels, mult, star, Some(0)).unwrap())
}

/// A random group of order <= 4 from the acceptance corpus.
pub fn random_small_group(rng: &mut SampleRng) -> Arc<StarSemigroup> {
    match rng.usize_below(5) {
        0 => cyclic_group(1),
        1 => cyclic_group(2),
        2 => cyclic_group(3),
        3 => cyclic_group(4),
        _ => klein_four_group(),
    }
}

/// A random action of a group on `n_points` points: generators act by
/// random permutations whose order divides the group exponent. Built by
/// assigning each cyclic factor a power of a random permutation.
pub fn random_group_action(
    group: &Arc<StarSemigroup>,
    n_points: usize,
    rng: &mut SampleRng,
) -> SemigroupAction {
    let n = group.len();
    // find a permutation sigma with sigma^n = id: random permutation made of
    // cycles whose lengths divide n
    let divisors: Vec<usize> = (1..=n).filter(|&d| n.is_multiple_of(d)).collect();
    let mut sigma: Vec<usize> = (0..n_points).collect();
    let shuffled = rng.permutation(n_points);
    let mut used = 0usize;
    while used < n_points {
        let remaining = n_points - used;
        let feasible: Vec<usize> = divisors.iter().cloned().filter(|&d| d <= remaining).collect();
        let len = feasible[rng.usize_below(feasible.len())];
        // cycle through the next `len` shuffled points
        for k in 0..len {
            sigma[shuffled[used + k]] = shuffled[used + (k + 1) % len];
        }
        used += len;
    }
    // table: element g_i acts as sigma^i for cyclic groups; for the Klein
    // group use sigma for `a`, an independent involution tau for `b`
    let mut table = vec![0usize; n * n_points];
    let pow = |p: &Vec<usize>, mut e: usize, x: usize| -> usize {
        let mut y = x;
        while e > 0 {
            y = p[y];
            e -= 1;
        }
        y
    };
    let is_klein = group.len() == 4 && (0..4).all(|s| group.mul(s, s) == 0) && group.label(1) == "a";
    if is_klein {
        // two commuting involutions: sigma2 and its conjugate-free partner;
        // use sigma^2 = id by squaring the cycle recipe
        let invol = |rng: &mut SampleRng| -> Vec<usize> {
            let mut t: Vec<usize> = (0..n_points).collect();
            let sh = rng.permutation(n_points);
            let mut i = 0;
            while i + 1 < n_points {
                if rng.f64() < 0.5 {
                    t[sh[i]] = sh[i + 1];
                    t[sh[i + 1]] = sh[i];
                    i += 2;
                } else {
                    i += 1;
                }
            }
            t
        };
        let a = invol(rng);
        // b must commute with a; the safe deterministic choice is a power of
        // a itself (a or the identity), keeping the action valid
        let b: Vec<usize> = if rng.f64() < 0.5 {
            (0..n_points).collect()
        } else {
            a.clone()
        };
        for x in 0..n_points {
            table[x] = x;
            table[n_points + x] = a[x];
            table[2 * n_points + x] = b[x];
            table[3 * n_points + x] = a[b[x]];
        }
    } else {
        for s in 0..n {
            for x in 0..n_points {
                table[s * n_points + x] = pow(&sigma, s, x);
            }
        }
    }
    SemigroupAction::new(group.clone(), n_points, table).unwrap()
}

/// Symmetrises a PSD kernel over a group action:
/// `k_sym(x,y) = sum_s k(s.x, s.y)`, which is invariant and PSD.
pub fn symmetrize_kernel(kernel: &OperatorKernel, action: &SemigroupAction) -> OperatorKernel {
    let m = kernel.len();
    let sg = action.semigroup();
    let mut values = Vec::with_capacity(m * m);
    for x in 0..m {
        for y in 0..m {
            let mut acc = LocallyBoundedOperator::zero(
                kernel.space().clone(),
                kernel.space().clone(),
            );
            for s in 0..sg.len() {
                acc = acc
                    .add(kernel.value(action.act(s, x), action.act(s, y)))
                    .unwrap();
            }
            values.push(acc);
        }
    }
    OperatorKernel::new(kernel.points().to_vec(), kernel.space().clone(), values).unwrap()
}

/// The full matrix algebra `M_d` carried by a constant-dimension chain.
pub fn full_matrix_algebra(d: usize, chain_len: usize) -> Arc<LocallyCStarAlgebra> {
    let space = coordinate_space(chain_poset(chain_len), vec![d; chain_len]);
    let mut units = Vec::with_capacity(d * d);
    for i in 0..d {
        for j in 0..d {
            let mut m = zeros(d, d);
            m[(i, j)] = c(1.0, 0.0);
            units.push(
                LocallyBoundedOperator::from_top(space.clone(), space.clone(), m, &Tol::default())
                    .unwrap(),
            );
        }
    }
    Arc::new(LocallyCStarAlgebra::generate(space, &units, &Tol::default()).unwrap())
}

/// Random Kraus-form CP map on a full matrix algebra: a constant-dimension
/// target chain over the same poset and `n_kraus` constant coherent Kraus
/// blocks.
pub fn random_kraus_cp(
    algebra: &Arc<LocallyCStarAlgebra>,
    target_dim: usize,
    n_kraus: usize,
    rng: &mut SampleRng,
) -> CpMap {
    let carrier = algebra.carrier().clone();
    let target = coordinate_space(
        carrier.poset().clone(),
        vec![target_dim; carrier.poset().len()],
    );
    let d = carrier.top_dim();
    let kraus: Vec<LocallyBoundedOperator> = (0..n_kraus)
        .map(|_| {
            let m = CMatrix::from_fn(d, target_dim, |_, _| rng.complex_gaussian());
            LocallyBoundedOperator::from_top(target.clone(), carrier.clone(), m, &Tol::default())
                .unwrap()
        })
        .collect();
    CpMap::from_kraus(algebra.clone(), &kraus).unwrap()
}

/// Random element of an algebra, complex Gaussian coefficients.
pub fn random_element(algebra: &LocallyCStarAlgebra, rng: &mut SampleRng) -> CVector {
    CVector::from_iterator(algebra.dim(), (0..algebra.dim()).map(|_| rng.complex_gaussian()))
}

/// Random abstract Hilbert module over a full matrix algebra: generators
/// are elements of the algebra itself with the concrete gramian
/// `[e_i, e_j] = e_i^* e_j`, the action table filled in wherever
/// `e_i . basis_k` stays in the complex span of the generators. Choosing
/// the generators inside a principal right ideal keeps the action total.
pub fn random_abstract_module(
    algebra: &Arc<LocallyCStarAlgebra>,
    n_generators: usize,
    ideal: bool,
    rng: &mut SampleRng,
) -> crate::csmodule::AbstractHilbertModule {
    use crate::linalg::lstsq;
    let n = algebra.dim();
    let gens: Vec<CVector> = if ideal {
        // e_1 = F, e_i = F g_i: span is the right ideal F A when F has rank 1
        let d = algebra.carrier().top_dim();
        let col = CMatrix::from_fn(d, 1, |_, _| rng.complex_gaussian());
        let row = CMatrix::from_fn(1, d, |_, _| rng.complex_gaussian());
        let f_top = &col * &row;
        let f = algebra.express_top(&f_top).unwrap();
        let mut gens = vec![f.clone()];
        for _ in 1..n_generators {
            let g = random_element(algebra, rng);
            gens.push(algebra.product_coeffs(&f, &g).unwrap());
        }
        gens
    } else {
        (0..n_generators).map(|_| random_element(algebra, rng)).collect()
    };
    let m = gens.len();
    let mut gramian = Vec::with_capacity(m * m);
    for gi in &gens {
        let star = algebra.star_coeffs(gi).unwrap();
        for gj in &gens {
            gramian.push(algebra.product_coeffs(&star, gj).unwrap());
        }
    }
    // partial action table: e_i . basis_k re-expressed over the generators
    // (complex coefficients) when the least-squares residual vanishes
    let mut span = zeros(n, m);
    for (j, g) in gens.iter().enumerate() {
        span.set_column(j, g);
    }
    let mut action = std::collections::HashMap::new();
    for (i, gi) in gens.iter().enumerate() {
        for k in 0..n {
            let mut basis_k = CVector::zeros(n);
            basis_k[k] = c(1.0, 0.0);
            let moved = algebra.product_coeffs(gi, &basis_k).unwrap();
            let target = CMatrix::from_column_slice(n, 1, moved.as_slice());
            let (x, residual) = lstsq(&span, &target);
            if residual <= 1e-9 * (1.0 + moved.norm()) {
                action.insert((i, k), CVector::from_column_slice(x.as_slice()));
            }
        }
    }
    crate::csmodule::AbstractHilbertModule::new(
        algebra.clone(),
        (0..m).map(|i| format!("e{i}")).collect(),
        gramian,
        action,
    )
    .unwrap()
}
