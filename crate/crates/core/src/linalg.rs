//! Small complex-vector helpers shared by the operators and solvers.

use num_complex::Complex64;

pub(crate) const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

pub fn norm2(v: &[Complex64]) -> f64 {
    // scaled accumulation avoids overflow on huge inputs
    let scale = v
        .iter()
        .map(|z| z.re.abs().max(z.im.abs()))
        .fold(0.0, f64::max);
    if scale == 0.0 || !scale.is_finite() {
        return if scale.is_finite() { 0.0 } else { scale };
    }
    let inv = 1.0 / scale;
    scale * v.iter().map(|z| (z * inv).norm_sqr()).sum::<f64>().sqrt()
}

pub fn norm_sqr(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// `⟨a, b⟩ = Σ conj(a_i) b_i`.
pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn sub(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn dist(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

pub fn scale(v: &mut [Complex64], s: f64) {
    v.iter_mut().for_each(|z| *z *= s);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn norm_handles_extremes() {
        let v = [Complex64::new(3e200, 0.0), Complex64::new(0.0, 4e200)];
        assert!((norm2(&v) / 5e200 - 1.0).abs() < 1e-15);
        assert_eq!(norm2(&[ZERO; 3]), 0.0);
        assert_eq!(norm2(&[]), 0.0);
    }
}
