//! Multilinear elements on boxes with constant coefficients.

use nalgebra::DMatrix;

const M1: [[f64; 2]; 2] = [[1.0 / 3.0, 1.0 / 6.0], [1.0 / 6.0, 1.0 / 3.0]];
const D1: [[f64; 2]; 2] = [[1.0, -1.0], [-1.0, 1.0]];
/// C1[a][b] = ∫ φ_a' φ_b on [0, 1].
const C1: [[f64; 2]; 2] = [[-0.5, -0.5], [0.5, 0.5]];

/// Exact reference integrals of products of Q1 basis functions and their derivatives on [0,1]^d.
#[derive(Debug, Clone)]
pub struct ReferenceElement {
    pub dim: usize,
    pub n_local: usize,
    mass: Vec<f64>,
    /// stiff[p * dim + q][a * n + b] = ∫ ∂_p φ_a ∂_q φ_b.
    stiff: Vec<Vec<f64>>,
}

impl ReferenceElement {
    pub fn new(dim: usize) -> Self {
        let n = 1 << dim;
        let bit = |a: usize, k: usize| (a >> k) & 1;
        let mut mass = vec![0.0; n * n];
        let mut stiff = vec![vec![0.0; n * n]; dim * dim];
        for a in 0..n {
            for b in 0..n {
                mass[a * n + b] = (0..dim).map(|k| M1[bit(a, k)][bit(b, k)]).product();
                for p in 0..dim {
                    for q in 0..dim {
                        let v: f64 = (0..dim)
                            .map(|k| {
                                let (ak, bk) = (bit(a, k), bit(b, k));
                                match (k == p, k == q) {
                                    (true, true) => D1[ak][bk],
                                    (true, false) => C1[ak][bk],
                                    (false, true) => C1[bk][ak],
                                    (false, false) => M1[ak][bk],
                                }
                            })
                            .product();
                        stiff[p * dim + q][a * n + b] = v;
                    }
                }
            }
        }
        ReferenceElement { dim, n_local: n, mass, stiff }
    }

    /// Local matrix of ∫ (∇u·G∇u + V u²) · density over a box of the given sizes,
    /// with G in box coordinates. Computed on the upper triangle and mirrored so it is
    /// exactly symmetric.
    pub fn local_matrix(&self, size: &[f64], g: &DMatrix<f64>, density: f64, potential: f64) -> Vec<f64> {
        let n = self.n_local;
        let d = self.dim;
        let vol: f64 = size.iter().product::<f64>() * density;
        let mut coef = vec![0.0; d * d];
        for p in 0..d {
            for q in 0..d {
                coef[p * d + q] = g[(p, q)] / (size[p] * size[q]);
            }
        }
        let mut out = vec![0.0; n * n];
        for a in 0..n {
            for b in a..n {
                let mut s = potential * self.mass[a * n + b];
                for (pq, c) in coef.iter().enumerate() {
                    if *c != 0.0 {
                        s += c * self.stiff[pq][a * n + b];
                    }
                }
                let v = vol * s;
                out[a * n + b] = v;
                out[b * n + a] = v;
            }
        }
        out
    }

    pub fn local_mass(&self, size: &[f64], density: f64) -> Vec<f64> {
        let vol: f64 = size.iter().product::<f64>() * density;
        self.mass.iter().map(|m| vol * m).collect()
    }
}
