//! Volume of the intersection of a Euclidean ball with an axis-parallel box.

use crate::numeric::integrate_pieces;

/// Squared distance from `x` to the box `[lo, hi]`.
pub fn box_dist2(x: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
    x.iter()
        .zip(lo.iter().zip(hi))
        .map(|(&v, (&a, &b))| {
            let e = if v < a { a - v } else if v > b { v - b } else { 0.0 };
            e * e
        })
        .sum()
}

/// Squared distance from `x` to the farthest point of the box `[lo, hi]`.
pub fn box_far2(x: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
    x.iter()
        .zip(lo.iter().zip(hi))
        .map(|(&v, (&a, &b))| {
            let e = (v - a).abs().max((b - v).abs());
            e * e
        })
        .sum()
}

/// `|B(x, r) ∩ [lo, hi]|` (Lebesgue measure).
pub fn ball_box_volume(x: &[f64], r: f64, lo: &[f64], hi: &[f64]) -> f64 {
    if r <= 0.0 {
        return 0.0;
    }
    let r2 = r * r;
    if box_dist2(x, lo, hi) >= r2 {
        return 0.0;
    }
    if box_far2(x, lo, hi) <= r2 {
        return lo.iter().zip(hi).map(|(a, b)| b - a).product();
    }
    // Shift so the ball is centred at the origin.
    let a: Vec<f64> = lo.iter().zip(x).map(|(l, c)| l - c).collect();
    let b: Vec<f64> = hi.iter().zip(x).map(|(h, c)| h - c).collect();
    centred(&a, &b, r)
}

fn centred(a: &[f64], b: &[f64], r: f64) -> f64 {
    match a.len() {
        1 => (b[0].min(r) - a[0].max(-r)).max(0.0),
        2 => disk_rect(a[0], b[0], a[1], b[1], r),
        _ => sliced(a, b, r),
    }
}

/// `∫_0^u √(r² − v²) dv`.
fn chord_primitive(u: f64, r: f64) -> f64 {
    let u = u.clamp(-r, r);
    let g = (r * r - u * u).max(0.0).sqrt();
    0.5 * (u * g + r * r * (u / r).asin())
}

/// Area of the disk of radius `r` at the origin intersected with
/// `[x0, x1] × [y0, y1]`, in closed form.
fn disk_rect(x0: f64, x1: f64, y0: f64, y1: f64, r: f64) -> f64 {
    let (ua, ub) = (x0.max(-r), x1.min(r));
    if ub <= ua || y1 <= -r || y0 >= r {
        return 0.0;
    }
    // Split where the chord half-length g(u) crosses |y0| or |y1|.
    let mut cuts = vec![ua, ub];
    for y in [y0, y1] {
        if y.abs() < r {
            let u = (r * r - y * y).sqrt();
            for c in [-u, u] {
                if c > ua && c < ub {
                    cuts.push(c);
                }
            }
        }
    }
    cuts.sort_by(f64::total_cmp);
    let mut area = 0.0;
    for w in cuts.windows(2) {
        let (p, q) = (w[0], w[1]);
        if q <= p {
            continue;
        }
        let m = 0.5 * (p + q);
        let g = (r * r - m * m).max(0.0).sqrt();
        let top_is_const = y1 < g;
        let bot_is_const = y0 > -g;
        let top = if top_is_const { y1 } else { g };
        let bot = if bot_is_const { y0 } else { -g };
        if top <= bot {
            continue;
        }
        let int_g = chord_primitive(q, r) - chord_primitive(p, r);
        let t = if top_is_const { y1 * (q - p) } else { int_g };
        let bt = if bot_is_const { y0 * (q - p) } else { -int_g };
        area += t - bt;
    }
    area.max(0.0)
}

/// Slices along the last axis and integrates the lower-dimensional volume.
fn sliced(a: &[f64], b: &[f64], r: f64) -> f64 {
    let k = a.len() - 1;
    let (za, zb) = (a[k].max(-r), b[k].min(r));
    if zb <= za {
        return 0.0;
    }
    let (ra, rb) = (&a[..k], &b[..k]);
    // The slice volume is smooth in z except where the slice radius meets a
    // face, edge or corner distance of the lower box.
    let mut crit: Vec<f64> = Vec::new();
    for sub in 0..3usize.pow(k as u32) {
        // each axis contributes nothing, its lower face, or its upper face
        let mut s2 = 0.0;
        let mut c = sub;
        for i in 0..k {
            match c % 3 {
                1 => s2 += ra[i] * ra[i],
                2 => s2 += rb[i] * rb[i],
                _ => {}
            }
            c /= 3;
        }
        if sub > 0 && s2 < r * r {
            let z = (r * r - s2).sqrt();
            crit.push(z);
            crit.push(-z);
        }
    }
    crit.push(0.0);
    let mut pts = vec![za, zb];
    pts.extend(crit.into_iter().filter(|&z| z > za && z < zb));
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let q = integrate_pieces(
        |z: f64| {
            let rho = (r * r - z * z).max(0.0).sqrt();
            centred(ra, rb, rho)
        },
        &pts,
        1e-11,
        0.0,
        200,
    );
    q.value
}
