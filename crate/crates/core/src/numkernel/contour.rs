use num_complex::Complex64;

/// Closed contour in the complex plane sampled for periodic-trapezoid
/// quadrature. Nodes run counterclockwise; `weights[j]` already contains the
/// parametrization derivative times the step, so a contour integral is just
/// `sum_j w_j f(z_j)`.
#[derive(Clone, Debug)]
pub struct Contour {
    pub nodes: Vec<Complex64>,
    pub weights: Vec<Complex64>,
}

impl Contour {
    /// Ellipse crossing the real axis exactly at `e_left` and `e_right`
    /// (encircling the segment between them), with vertical half-height
    /// `aspect` times the horizontal half-width. Node 0 sits at `e_right`.
    pub fn ellipse(e_left: f64, e_right: f64, aspect: f64, n_nodes: usize) -> Contour {
        assert!(e_right > e_left, "ellipse needs e_left < e_right");
        assert!(n_nodes >= 4, "too few contour nodes");
        assert!(aspect > 0.0);
        let c = 0.5 * (e_left + e_right);
        let a = 0.5 * (e_right - e_left);
        let b = aspect * a;
        let dt = 2.0 * std::f64::consts::PI / n_nodes as f64;
        let mut nodes = Vec::with_capacity(n_nodes);
        let mut weights = Vec::with_capacity(n_nodes);
        for j in 0..n_nodes {
            let t = dt * j as f64;
            nodes.push(Complex64::new(c + a * t.cos(), b * t.sin()));
            weights.push(Complex64::new(-a * t.sin(), b * t.cos()) * dt);
        }
        Contour { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Trapezoidal contour integral of pre-evaluated samples; spectrally accurate
/// for integrands analytic in a neighbourhood of the contour.
pub fn quad_closed(values: &[Complex64], contour: &Contour) -> Complex64 {
    assert_eq!(values.len(), contour.len(), "sample count mismatch");
    values
        .iter()
        .zip(contour.weights.iter())
        .map(|(f, w)| f * w)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn residue_of_simple_pole() {
        let contour = Contour::ellipse(-2.0, 2.0, 0.7, 64);
        let pole = Complex64::new(0.3, 0.0);
        let vals: Vec<Complex64> = contour.nodes.iter().map(|&z| 1.0 / (z - pole)).collect();
        let integral = quad_closed(&vals, &contour);
        let expect = Complex64::new(0.0, 2.0 * std::f64::consts::PI);
        assert!((integral - expect).norm() < 1e-10);
    }

    #[test]
    fn pole_outside_gives_zero() {
        let contour = Contour::ellipse(-1.0, 1.0, 0.5, 64);
        let pole = Complex64::new(3.0, 0.0);
        let vals: Vec<Complex64> = contour.nodes.iter().map(|&z| 1.0 / (z - pole)).collect();
        assert!(quad_closed(&vals, &contour).norm() < 1e-10);
    }

    #[test]
    fn doubling_nodes_tightens_residue() {
        let pole = Complex64::new(-0.9, 0.0);
        let expect = Complex64::new(0.0, 2.0 * std::f64::consts::PI);
        let mut errs = Vec::new();
        for n in [16usize, 32] {
            let contour = Contour::ellipse(-1.0, 1.0, 0.6, n);
            let vals: Vec<Complex64> = contour.nodes.iter().map(|&z| 1.0 / (z - pole)).collect();
            errs.push((quad_closed(&vals, &contour) - expect).norm());
        }
        assert!(errs[1] < errs[0] * 0.5);
    }

    #[test]
    fn entire_integrand_vanishes() {
        let contour = Contour::ellipse(-1.5, 2.5, 0.4, 48);
        let vals: Vec<Complex64> = contour.nodes.iter().map(|&z| z * z + z).collect();
        assert!(quad_closed(&vals, &contour).norm() < 1e-12);
    }

    #[test]
    fn crossings_at_requested_points() {
        let contour = Contour::ellipse(-6.0, 1.5, 0.35, 128);
        assert!((contour.nodes[0] - Complex64::new(1.5, 0.0)).norm() < 1e-14);
        assert!((contour.nodes[64] - Complex64::new(-6.0, 0.0)).norm() < 1e-12);
    }
}
