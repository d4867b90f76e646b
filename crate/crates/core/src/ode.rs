//! Fixed-step classical Runge–Kutta for small first-order systems.

/// One RK4 step of `y' = f(t, y)` for a two-component state.
pub fn rk4_step(f: &impl Fn(f64, [f64; 2]) -> [f64; 2], t: f64, y: [f64; 2], h: f64) -> [f64; 2] {
    let add = |a: [f64; 2], b: [f64; 2], s: f64| [a[0] + s * b[0], a[1] + s * b[1]];
    let k1 = f(t, y);
    let k2 = f(t + 0.5 * h, add(y, k1, 0.5 * h));
    let k3 = f(t + 0.5 * h, add(y, k2, 0.5 * h));
    let k4 = f(t + h, add(y, k3, h));
    [
        y[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        y[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
    ]
}

/// Integrates from `t0` to `t1` with steps no longer than `max_step`.
pub fn rk4_span(
    f: &impl Fn(f64, [f64; 2]) -> [f64; 2],
    t0: f64,
    t1: f64,
    mut y: [f64; 2],
    max_step: f64,
) -> [f64; 2] {
    let span = t1 - t0;
    if span == 0.0 {
        return y;
    }
    let steps = (span.abs() / max_step).ceil().max(1.0) as usize;
    let h = span / steps as f64;
    for k in 0..steps {
        y = rk4_step(f, t0 + k as f64 * h, y, h);
    }
    y
}
