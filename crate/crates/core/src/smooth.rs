//! C-infinity transition functions shared by the coordinate profile and the
//! weight symbols.

fn flat(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        (-1.0 / t).exp()
    }
}

/// Smooth step: 0 for `t <= 0`, 1 for `t >= 1`, all derivatives vanish at both ends.
pub fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let a = flat(t);
        a / (a + flat(1.0 - t))
    }
}

/// Derivative of [`smooth_step`].
pub fn smooth_step_deriv(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        return 0.0;
    }
    let a = flat(t);
    let b = flat(1.0 - t);
    let da = a / (t * t);
    let db = -b / ((1.0 - t) * (1.0 - t));
    (da * (a + b) - a * (da + db)) / ((a + b) * (a + b))
}
