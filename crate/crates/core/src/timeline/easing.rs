use crate::model::Easing;

/// Eased progress for `u` in [0, 1]. Inputs outside are clamped first.
pub fn ease(easing: Easing, u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    match easing {
        Easing::Linear => u,
        Easing::EaseIn => u * u,
        Easing::EaseOut => u * (2.0 - u),
        Easing::EaseInOut => {
            if u < 0.5 {
                2.0 * u * u
            } else {
                let v = 1.0 - u;
                1.0 - 2.0 * v * v
            }
        }
    }
}
