use nalgebra::{Matrix3, Vector3};

use super::SuperquadricParams;

/// Picks one representative of the symmetry class of `sq`.
///
/// Model `x`/`y` are swapped (with a quarter turn about `z`) so that
/// `a1 >= a2`. Among the four half turns that keep the model axes as lines,
/// the one chosen makes `kx + ky > 0` (or, untapered, the `z` column
/// positive), then the `x` column positive; "positive" means the
/// largest-magnitude component is positive. Half turns about `x` or `y`
/// reverse `z` and therefore negate the taper.
pub fn canonicalize(sq: &SuperquadricParams) -> SuperquadricParams {
    let mut out = *sq;
    let mut r = sq.rotation();

    if out.scale[1] > out.scale[0] {
        out.scale.swap(0, 1);
        out.taper.swap(0, 1);
        // New x is the old y, new y is the old -x.
        let quarter = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        r *= quarter;
    }

    let taper_sum = out.taper[0] + out.taper[1];
    let tapered = out.taper[0] != 0.0 || out.taper[1] != 0.0;
    let flip_z = if tapered {
        !(taper_sum > 0.0 || (taper_sum == 0.0 && out.taper[0] > 0.0))
    } else {
        !leading_positive(&r.column(2).into_owned())
    };
    let flip_x = !leading_positive(&r.column(0).into_owned());

    let sx = if flip_x { -1.0 } else { 1.0 };
    let sz = if flip_z { -1.0 } else { 1.0 };
    // det must stay +1, so y absorbs the product of the other two signs.
    let flips = Matrix3::from_diagonal(&Vector3::new(sx, sx * sz, sz));
    r *= flips;
    if flip_z {
        out.taper = out.taper.map(|k| -k);
    }

    out.set_rotation(&r);
    out
}

/// Whether the largest-magnitude component of `v` is positive; near-ties go
/// to the lowest index.
fn leading_positive(v: &Vector3<f64>) -> bool {
    let max = v.amax();
    let i = (0..3).find(|&i| v[i].abs() >= max - 1e-9).unwrap_or(0);
    v[i] > 0.0
}
