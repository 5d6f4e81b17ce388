//! Adaptive Gauss–Legendre quadrature.

/// Nodes and weights of the `m`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    for i in 0..m.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_m.
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(m, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(m, z);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        nodes[i] = -z;
        nodes[m - 1 - i] = z;
        weights[i] = w;
        weights[m - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(m: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    for k in 2..=m {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let m = m as f64;
    (p1, m * (z * p1 - p0) / (z * z - 1.0))
}

/// Globally adaptive bisection driven by a fixed Gauss–Legendre rule.
pub struct Integrator {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    max_depth: u32,
}

impl Integrator {
    pub fn new(points: usize) -> Self {
        let (nodes, weights) = gauss_legendre(points);
        Integrator {
            nodes,
            weights,
            max_depth: 40,
        }
    }

    fn rule(&self, f: &impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(z, w)| w * f(mid + half * z))
            .sum::<f64>()
            * half
    }

    /// Integrates `f` over `[a, b]` to absolute tolerance `tol`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
        let whole = self.rule(&f, a, b);
        self.refine(&f, a, b, whole, tol, 0)
    }

    fn refine(
        &self,
        f: &impl Fn(f64) -> f64,
        a: f64,
        b: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let mid = 0.5 * (a + b);
        let left = self.rule(f, a, mid);
        let right = self.rule(f, mid, b);
        if (left + right - whole).abs() <= tol || depth >= self.max_depth {
            return left + right;
        }
        self.refine(f, a, mid, left, 0.5 * tol, depth + 1)
            + self.refine(f, mid, b, right, 0.5 * tol, depth + 1)
    }
}
