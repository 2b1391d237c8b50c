//! Small fixed quadrature rules.

/// 8-point Gauss–Legendre nodes and weights on `[-1, 1]`.
const GL8: [(f64, f64); 8] = [
    (-0.9602898564975362, 0.10122853629037669),
    (-0.7966664774136267, 0.22238103445337434),
    (-0.525532409916329, 0.31370664587788705),
    (-0.18343464249564978, 0.36268378337836177),
    (0.18343464249564978, 0.36268378337836177),
    (0.525532409916329, 0.31370664587788705),
    (0.7966664774136267, 0.22238103445337434),
    (0.9602898564975362, 0.10122853629037669),
];

/// Integrates `f` over `[a, b]` with the 8-point Gauss–Legendre rule.
///
/// Stops early and returns `None` as soon as `f` yields a non-finite value.
pub fn gauss_legendre8(a: f64, b: f64, mut f: impl FnMut(f64) -> Option<f64>) -> Option<f64> {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut acc = 0.0;
    for &(x, w) in GL8.iter() {
        let v = f(mid + half * x)?;
        if !v.is_finite() {
            return None;
        }
        acc += w * v;
    }
    Some(acc * half)
}

/// Travel time `∫_0^len ds / g(s)` of a particle moving with positive speed
/// `g` along a segment.
///
/// Uses the substitution `s = len·w²`, which turns an integrable `s^{-γ}`
/// singularity of `1/g` at `s = 0` (a drift vanishing like `|x|^γ` at an
/// equilibrium) into a bounded integrand. Returns `None` if the speed is
/// not strictly positive at some quadrature node.
pub fn travel_time(len: f64, mut speed: impl FnMut(f64) -> f64) -> Option<f64> {
    if len <= 0.0 {
        return Some(0.0);
    }
    gauss_legendre8(0.0, 1.0, |w| {
        let g = speed(len * w * w);
        (g > 0.0).then(|| 2.0 * len * w / g)
    })
}
