//! Small helpers on `[f64; 3]`.

pub type Vec3 = [f64; 3];

pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

/// `a / |a|`, or `None` when `|a| < eps`.
pub fn normalize(a: Vec3, eps: f64) -> Option<Vec3> {
    let n = norm(a);
    (n >= eps && n.is_finite()).then(|| scale(a, 1.0 / n))
}

/// Angle between two unit vectors in radians, with the dot product clamped.
pub fn angle(a: Vec3, b: Vec3) -> f64 {
    dot(a, b).clamp(-1.0, 1.0).acos()
}

/// Spherical interpolation from `a` toward `b` by fraction `w`. Returns `a`
/// unchanged for `w == 0`; nearly antiparallel inputs fall back to the
/// normalized linear blend.
pub fn slerp(a: Vec3, b: Vec3, w: f64) -> Vec3 {
    if w == 0.0 {
        return a;
    }
    let theta = angle(a, b);
    let s = theta.sin();
    if s < 1e-9 {
        let lin = add(scale(a, 1.0 - w), scale(b, w));
        return normalize(lin, 1e-12).unwrap_or(a);
    }
    let wa = ((1.0 - w) * theta).sin() / s;
    let wb = (w * theta).sin() / s;
    let v = add(scale(a, wa), scale(b, wb));
    normalize(v, 1e-12).unwrap_or(a)
}

/// Any unit vector orthogonal to the unit vector `a`.
pub fn orthogonal(a: Vec3) -> Vec3 {
    let helper = if a[0].abs() < 0.9 {
        [1.0, 0.0, 0.0]
    } else {
        [0.0, 1.0, 0.0]
    };
    normalize(cross(a, helper), 1e-12).expect("helper not parallel")
}
