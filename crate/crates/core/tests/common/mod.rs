//! Independent reference computations for the integration tests.
//!
//! Kets are label → amplitude maps; beamsplitters are applied by hand from
//! the convention `in1 → (out1 + i·out2)/√2`, `in2 → (out2 + i·out1)/√2`.
//! Nothing here calls into the library's linear algebra.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;

pub type Ket = BTreeMap<String, Complex64>;

pub fn z(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn ket(terms: &[(&str, Complex64)]) -> Ket {
    let mut k = Ket::new();
    for (l, a) in terms {
        *k.entry(l.to_string()).or_default() += *a;
    }
    k
}

pub fn amp(k: &Ket, label: &str) -> Complex64 {
    k.get(label).copied().unwrap_or_default()
}

pub fn braket(a: &Ket, b: &Ket) -> Complex64 {
    a.iter().map(|(l, x)| x.conj() * amp(b, l)).sum()
}

pub fn add(a: &Ket, b: &Ket) -> Ket {
    let mut out = a.clone();
    for (l, x) in b {
        *out.entry(l.clone()).or_default() += *x;
    }
    out
}

pub fn scale(a: &Ket, s: Complex64) -> Ket {
    a.iter().map(|(l, x)| (l.clone(), x * s)).collect()
}

pub fn keep(a: &Ket, labels: &[&str]) -> Ket {
    a.iter()
        .filter(|(l, _)| labels.contains(&l.as_str()))
        .map(|(l, x)| (l.clone(), *x))
        .collect()
}

/// Applies a balanced splitter to a ket with no amplitude on disjoint output arms.
pub fn splitter(k: &Ket, inputs: [&str; 2], outputs: [&str; 2]) -> Ket {
    let h = FRAC_1_SQRT_2;
    let (a1, a2) = (amp(k, inputs[0]), amp(k, inputs[1]));
    let mut out = k.clone();
    for l in inputs {
        out.remove(l);
    }
    for l in outputs {
        if !inputs.contains(&l) {
            assert!(
                amp(k, l).norm() == 0.0,
                "oracle splitter needs empty output arms"
            );
        }
    }
    *out.entry(outputs[0].to_string()).or_default() += a1 * h + a2 * z(0.0, h);
    *out.entry(outputs[1].to_string()).or_default() += a1 * z(0.0, h) + a2 * h;
    out
}

/// Splitter acting on the path factor of `(path,pol)` labels.
pub fn splitter_pol(k: &Ket, inputs: [&str; 2], outputs: [&str; 2]) -> Ket {
    let mut out = Ket::new();
    for pol in ["H", "V"] {
        let sub: Ket = ["L", "R", "L'", "R'"]
            .iter()
            .map(|p| (p.to_string(), amp(k, &format!("({p},{pol})"))))
            .collect();
        for (p, a) in splitter(&sub, inputs, outputs) {
            if a.norm() != 0.0 {
                *out.entry(format!("({p},{pol})")).or_default() += a;
            }
        }
    }
    out
}

pub fn simple_in() -> Ket {
    ket(&[("L", z(FRAC_1_SQRT_2, 0.0)), ("R", z(0.0, FRAC_1_SQRT_2))])
}

pub fn simple_u(k: &Ket) -> Ket {
    splitter(k, ["L", "R"], ["L'", "R'"])
}

pub fn cheshire_in() -> Ket {
    ket(&[
        ("(L,H)", z(FRAC_1_SQRT_2, 0.0)),
        ("(R,V)", z(FRAC_1_SQRT_2, 0.0)),
    ])
}

pub fn cheshire_u(k: &Ket) -> Ket {
    splitter_pol(k, ["L", "R"], ["L'", "R'"])
}

/// `σ_z = −i(|V⟩⟨H| − |H⟩⟨V|)` on arm `arm`, zero elsewhere.
pub fn cheshire_sigma_z(k: &Ket, arm: &str) -> Ket {
    let h = amp(k, &format!("({arm},H)"));
    let v = amp(k, &format!("({arm},V)"));
    ket(&[
        (format!("({arm},V)").as_str(), z(0.0, -1.0) * h),
        (format!("({arm},H)").as_str(), z(0.0, 1.0) * v),
    ])
}

pub fn cheshire_pi(k: &Ket, arm: &str) -> Ket {
    keep(k, &[&format!("({arm},H)"), &format!("({arm},V)")])
}

pub fn nested_in() -> Ket {
    ket(&[
        ("A", z(0.0, FRAC_1_SQRT_2)),
        ("B", z(0.0, 0.5)),
        ("C", z(0.5, 0.0)),
    ])
}

pub fn nested_bs3(k: &Ket) -> Ket {
    splitter(k, ["B", "C"], ["D3", "E"])
}

pub fn nested_bs4(k: &Ket) -> Ket {
    splitter(k, ["A", "E"], ["D2", "D1"])
}

pub fn weak_value(f: &Ket, u: impl Fn(&Ket) -> Ket, input: &Ket, s_input: &Ket) -> Complex64 {
    braket(f, &u(s_input)) / braket(f, &u(input))
}

/// Normalized Gaussian pointer amplitude with `|m(q)|² ~ N(shift, Δ²)`.
pub fn gaussian(q: f64, shift: f64, delta: f64) -> f64 {
    (2.0 * PI * delta * delta).powf(-0.25) * (-(q - shift).powi(2) / (4.0 * delta * delta)).exp()
}

/// Trapezoid integration of `(∫|ψ|², ∫q|ψ|²)` for `ψ = Σ c_k m(q − s_k)`.
pub fn grid_moments(terms: &[(Complex64, f64)], delta: f64, points: usize) -> (f64, f64) {
    let lo = terms.iter().map(|t| t.1).fold(f64::INFINITY, f64::min) - 14.0 * delta;
    let hi = terms.iter().map(|t| t.1).fold(f64::NEG_INFINITY, f64::max) + 14.0 * delta;
    let h = (hi - lo) / (points - 1) as f64;
    let (mut n, mut m) = (0.0, 0.0);
    for i in 0..points {
        let q = lo + i as f64 * h;
        let psi: Complex64 = terms.iter().map(|(c, s)| c * gaussian(q, *s, delta)).sum();
        let w = if i == 0 || i == points - 1 { 0.5 } else { 1.0 };
        n += w * psi.norm_sqr();
        m += w * q * psi.norm_sqr();
    }
    (n * h, m * h)
}

/// Postselected pointer mean from the eigenbranch amplitudes `a_k = ⟨f|U Π_k|in⟩`.
///
/// Uses the Gaussian overlap identities `∫ m(q−x) m(q−y) dq = exp(−(x−y)²/8Δ²)`
/// and `∫ q m(q−x) m(q−y) dq = (x+y)/2 · exp(−(x−y)²/8Δ²)`.
pub fn pointer_mean_from_branches(branches: &[(Complex64, f64)], g: f64, delta: f64) -> (f64, f64) {
    let (mut norm, mut first) = (z(0.0, 0.0), z(0.0, 0.0));
    for (aj, sj) in branches {
        for (ak, sk) in branches {
            let (x, y) = (g * sj, g * sk);
            let e = (-(x - y).powi(2) / (8.0 * delta * delta)).exp();
            norm += aj.conj() * ak * e;
            first += aj.conj() * ak * e * (x + y) / 2.0;
        }
    }
    (first.re / norm.re, norm.re)
}
