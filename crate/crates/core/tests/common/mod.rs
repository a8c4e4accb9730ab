//! Random maps with controlled metric spectra, shared by the integration tests.
#![allow(dead_code)]

use confmorph::{InnerSpace, MapBetween};
use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_matrix<R: Rng>(
    rows: usize,
    cols: usize,
    lo: f64,
    hi: f64,
    rng: &mut R,
) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(lo..hi))
}

/// `B Bᵀ + I/2` for uniform `B`: SPD with condition number of a few dozen.
pub fn random_spd<R: Rng>(n: usize, rng: &mut R) -> InnerSpace {
    let b = uniform_matrix(n, n, -1.0, 1.0, rng);
    let g = &b * b.transpose() + DMatrix::identity(n, n) * 0.5;
    InnerSpace::new(g).expect("SPD by construction")
}

/// Euclidean about a third of the time, otherwise a random SPD Gram.
pub fn random_space<R: Rng>(n: usize, rng: &mut R) -> InnerSpace {
    if rng.gen_bool(0.3) {
        InnerSpace::euclidean(n)
    } else {
        random_spd(n, rng)
    }
}

pub fn random_orthogonal<R: Rng>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let a = uniform_matrix(n, n, -1.0, 1.0, rng);
    a.qr().q()
}

pub fn cholesky_lower(space: &InnerSpace) -> DMatrix<f64> {
    space.gram().clone().cholesky().expect("SPD").l()
}

/// Converts a map given in metric-orthonormal coordinates into the matrix
/// acting on raw coordinates: `M = L_W⁻ᵀ A L_Vᵀ`.
pub fn from_whitened(a: &DMatrix<f64>, domain: InnerSpace, codomain: InnerSpace) -> MapBetween {
    let lv = cholesky_lower(&domain);
    let lw = cholesky_lower(&codomain);
    let lw_t_inv = lw.transpose().try_inverse().expect("invertible");
    let m = lw_t_inv * a * lv.transpose();
    MapBetween::new(m, domain, codomain).expect("consistent shapes")
}

/// A map between the given spaces whose metric singular values are `sigma`.
pub fn map_with_spectrum<R: Rng>(
    sigma: &[f64],
    domain: InnerSpace,
    codomain: InnerSpace,
    rng: &mut R,
) -> MapBetween {
    let (n, m) = (domain.dim(), codomain.dim());
    assert!(sigma.len() <= n.min(m));
    let u = random_orthogonal(m, rng);
    let v = random_orthogonal(n, rng);
    let mut a = DMatrix::zeros(m, n);
    for (i, &s) in sigma.iter().enumerate() {
        a += u.column(i) * v.column(i).transpose() * s;
    }
    from_whitened(&a, domain, codomain)
}

/// Spectrum with `above` values strictly above a repeated minimum `s_min`
/// (multiplicity `mult`). Distinct values are separated by at least 10%.
pub fn clustered_spectrum<R: Rng>(above: usize, mult: usize, rng: &mut R) -> Vec<f64> {
    let s_min = rng.gen_range(0.5..2.0);
    let mut s = Vec::with_capacity(above + mult);
    let mut level = s_min;
    for _ in 0..above {
        level *= rng.gen_range(1.1..1.8);
        s.push(level);
    }
    s.reverse();
    s.extend(std::iter::repeat_n(s_min, mult));
    s
}

pub struct Shape {
    pub n: usize,
    pub m: usize,
    pub rank: usize,
    pub above: usize,
}

/// A random map satisfying the geometric criterion by construction.
/// `single_cluster_bias` is the chance of forcing one cluster.
pub fn random_geometric<R: Rng>(
    max_dim: usize,
    single_cluster_bias: f64,
    rng: &mut R,
) -> (MapBetween, Shape) {
    let n = rng.gen_range(1..=max_dim);
    let m = rng.gen_range(1..=max_dim);
    let rank = rng.gen_range(0..=n.min(m));
    let nullity = n - rank;
    let above = if rank == 0 || rng.gen_bool(single_cluster_bias) {
        0
    } else {
        rng.gen_range(0..=nullity.min(rank - 1))
    };
    let sigma = if rank == 0 {
        Vec::new()
    } else {
        clustered_spectrum(above, rank - above, rng)
    };
    let t = map_with_spectrum(&sigma, random_space(n, rng), random_space(m, rng), rng);
    (t, Shape { n, m, rank, above })
}

/// A random map violating the criterion: more values above the minimum
/// cluster than kernel dimensions.
pub fn random_non_geometric<R: Rng>(max_dim: usize, rng: &mut R) -> (MapBetween, Shape) {
    loop {
        let n = rng.gen_range(1..=max_dim);
        let m = rng.gen_range(1..=max_dim);
        let rank = rng.gen_range(1..=n.min(m));
        let nullity = n - rank;
        // need above > nullity with above ≤ rank − 1
        if rank < nullity + 2 {
            continue;
        }
        let above = rng.gen_range(nullity + 1..=rank - 1);
        let sigma = clustered_spectrum(above, rank - above, rng);
        let t = map_with_spectrum(&sigma, random_space(n, rng), random_space(m, rng), rng);
        return (t, Shape { n, m, rank, above });
    }
}

/// Largest singular value of the map in metric-orthonormal coordinates.
pub fn whitened_norm(t: &MapBetween) -> f64 {
    confmorph::metric_svd(t).sigma_max()
}

/// Cayley transform `(I − S)⁻¹(I + S)` of a random skew matrix scaled by `eps`:
/// an orthogonal matrix within `O(eps)` of the identity.
pub fn near_identity_rotation<R: Rng>(n: usize, eps: f64, rng: &mut R) -> DMatrix<f64> {
    let b = uniform_matrix(n, n, -1.0, 1.0, rng);
    let s = (&b - b.transpose()) * (0.5 * eps);
    let id = DMatrix::<f64>::identity(n, n);
    (&id - &s)
        .try_inverse()
        .expect("I − S is invertible for skew S")
        * (&id + &s)
}

/// A sequence `T_k → T` of geometric maps whose canonical factors stay near
/// the factor of `T`. Terms rotate the whitened map on both sides by
/// `O(1/k)`, scale it by `1 + 1/k`, and for `k ≤ burn_in` add one extra
/// singular direction (kernel to range complement) at the level of `σ_min`,
/// so the rank is larger for the first terms and settles afterwards.
pub fn stabilizing_sequence<R: Rng>(
    t: &MapBetween,
    len: usize,
    burn_in: usize,
    rng: &mut R,
) -> Vec<MapBetween> {
    let svd = confmorph::metric_svd(t);
    let (n, m) = (t.domain().dim(), t.codomain().dim());
    let k = confmorph::numerical_rank(t, &confmorph::TolerancePolicy::default());
    let sigma_min = svd.singular_values[..k].last().copied().unwrap_or(1.0);
    let a = t.whitened();
    let (u, v) = whitened_frames(&a);
    let extra = if k < n.min(m) {
        u.column(k) * v.column(k).transpose() * sigma_min
    } else {
        DMatrix::zeros(m, n)
    };
    // the widened map must itself be geometric, otherwise no burn-in
    let widened = from_whitened(&(&a + &extra), t.domain().clone(), t.codomain().clone());
    let extra = if confmorph::analyze(&widened, &confmorph::TolerancePolicy::default()).is_geometric
    {
        extra
    } else {
        DMatrix::zeros(m, n)
    };
    (1..=len)
        .map(|i| {
            let eps = 1.0 / i as f64;
            let mut ai = a.clone();
            if i <= burn_in {
                ai += &extra;
            }
            let rw = near_identity_rotation(m, eps, rng);
            let rv = near_identity_rotation(n, eps, rng);
            let ai = rw * ai * rv * (1.0 + eps);
            from_whitened(&ai, t.domain().clone(), t.codomain().clone())
        })
        .collect()
}

/// Full orthonormal left and right singular frames of a Euclidean matrix,
/// ordered by decreasing singular value.
pub fn whitened_frames(a: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let (m, n) = a.shape();
    let t = MapBetween::new(
        a.clone(),
        InnerSpace::euclidean(n),
        InnerSpace::euclidean(m),
    )
    .unwrap();
    let svd = confmorph::metric_svd(&t);
    (svd.left, svd.right)
}

/// A random polynomial scalar field as source text together with its exact
/// gradient, so tests need not trust the parser's differentiation.
pub struct PolyField {
    pub source: String,
    terms: Vec<(f64, Vec<i32>)>,
}

const VARS: [&str; 3] = ["x", "y", "z"];

impl PolyField {
    pub fn random<R: Rng>(dim: usize, rng: &mut R) -> Self {
        let count = rng.gen_range(1..=4);
        let terms: Vec<(f64, Vec<i32>)> = (0..count)
            .map(|_| {
                let c = (rng.gen_range(-2.0..2.0) * 1e4_f64).round() / 1e4;
                let e = (0..dim).map(|_| rng.gen_range(0..=3)).collect();
                (c, e)
            })
            .collect();
        let body: Vec<String> = terms
            .iter()
            .map(|(c, e)| {
                let mut s = format!("({c})");
                for (v, &p) in VARS.iter().zip(e) {
                    if p > 0 {
                        s.push_str(&format!("*{v}^{p}"));
                    }
                }
                s
            })
            .collect();
        let source = format!("f({}) = {}", VARS[..dim].join(","), body.join(" + "));
        Self { source, terms }
    }

    pub fn dim(&self) -> usize {
        self.terms[0].1.len()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(c, e)| c * x.iter().zip(e).map(|(xi, &p)| xi.powi(p)).product::<f64>())
            .sum()
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        (0..self.dim())
            .map(|j| {
                self.terms
                    .iter()
                    .filter(|(_, e)| e[j] > 0)
                    .map(|(c, e)| {
                        let mut p = c * e[j] as f64 * x[j].powi(e[j] - 1);
                        for (i, (&xi, &ei)) in x.iter().zip(e).enumerate() {
                            if i != j {
                                p *= xi.powi(ei);
                            }
                        }
                        p
                    })
                    .sum()
            })
            .collect()
    }
}
