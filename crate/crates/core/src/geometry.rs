//! Obstacle boundaries and their Nyström discretizations.
//!
//! Smooth curves are sampled at equispaced parameter values `t_j = 2πj/n`.
//! Polygons get `n/sides` nodes per side on the half-shifted grid
//! `t_j = 2π(j + 1/2)/n`, graded towards the corners by
//! `g(σ) = σ^q / (σ^q + (1-σ)^q)`. All curves are stored counterclockwise so
//! that `ν = (x_2', -x_1')/|x'|` points out of the obstacle.

use crate::error::{Error, Result};
use std::f64::consts::PI;
use std::ops::Range;

pub type Vec2 = [f64; 2];

pub const DEFAULT_GRADING: f64 = 3.0;

fn rotate(v: Vec2, angle: f64) -> Vec2 {
    let (s, c) = angle.sin_cos();
    [c * v[0] - s * v[1], s * v[0] + c * v[1]]
}

fn sub(a: Vec2, b: Vec2) -> Vec2 {
    [a[0] - b[0], a[1] - b[1]]
}

fn norm(a: Vec2) -> f64 {
    a[0].hypot(a[1])
}

fn cross(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

/// Star-shaped curve `x(t) = c + R(rot) ρ(t) (cos t, sin t)` with
/// `ρ(t) = r0 + Σ_k a_k cos(kt) + b_k sin(kt)`, `k = 1, 2, ...`.
#[derive(Clone, Debug, PartialEq)]
pub struct StarCurve {
    pub center: Vec2,
    pub r0: f64,
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
    pub rotation: f64,
}

impl StarCurve {
    /// `ρ` and its first three derivatives.
    fn radius_derivs(&self, t: f64) -> [f64; 4] {
        let mut out = [self.r0, 0.0, 0.0, 0.0];
        let terms = self.cos.len().max(self.sin.len());
        for k in 1..=terms {
            let a = self.cos.get(k - 1).copied().unwrap_or(0.0);
            let b = self.sin.get(k - 1).copied().unwrap_or(0.0);
            let kf = k as f64;
            let (s, c) = (kf * t).sin_cos();
            out[0] += a * c + b * s;
            out[1] += kf * (-a * s + b * c);
            out[2] += -kf * kf * (a * c + b * s);
            out[3] += kf * kf * kf * (a * s - b * c);
        }
        out
    }
}

/// Position and parameter derivatives at one point of a smooth curve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvePoint {
    pub pos: Vec2,
    pub d1: Vec2,
    pub d2: Vec2,
    pub d3: Vec2,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Curve {
    /// `x(t) = center + radius (cos(t + phase), sin(t + phase))`.
    Circle {
        center: Vec2,
        radius: f64,
        phase: f64,
    },
    Star(StarCurve),
    /// Vertices in counterclockwise order (normalized on construction).
    Polygon {
        vertices: Vec<Vec2>,
    },
}

impl Curve {
    pub fn circle(center: Vec2, radius: f64) -> Result<Curve> {
        let c = Curve::Circle {
            center,
            radius,
            phase: 0.0,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn star(center: Vec2, r0: f64, cos: Vec<f64>, sin: Vec<f64>) -> Result<Curve> {
        let c = Curve::Star(StarCurve {
            center,
            r0,
            cos,
            sin,
            rotation: 0.0,
        });
        c.validate()?;
        Ok(c)
    }

    /// Validated polygon, reordered to counterclockwise if necessary.
    pub fn polygon(vertices: Vec<Vec2>) -> Result<Curve> {
        let mut v = vertices;
        if signed_area(&v) < 0.0 {
            v.reverse();
        }
        let c = Curve::Polygon { vertices: v };
        c.validate()?;
        Ok(c)
    }

    pub fn is_smooth(&self) -> bool {
        !matches!(self, Curve::Polygon { .. })
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Curve::Circle { center, radius, phase } => {
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(Error::geometry(format!("circle radius must be positive, got {radius}")));
                }
                if !(center.iter().all(|c| c.is_finite()) && phase.is_finite()) {
                    return Err(Error::geometry("circle parameters must be finite"));
                }
            }
            Curve::Star(s) => {
                let finite = s.r0.is_finite()
                    && s.rotation.is_finite()
                    && s.center.iter().chain(&s.cos).chain(&s.sin).all(|c| c.is_finite());
                if !finite {
                    return Err(Error::geometry("star curve parameters must be finite"));
                }
                let samples = 4096;
                for j in 0..samples {
                    let t = 2.0 * PI * j as f64 / samples as f64;
                    if s.radius_derivs(t)[0] <= 1e-8 * s.r0.abs().max(1.0) {
                        return Err(Error::geometry("star curve radius must stay positive"));
                    }
                }
            }
            Curve::Polygon { vertices } => validate_polygon(vertices)?,
        }
        Ok(())
    }

    /// Rotation by `angle` about the origin followed by a translation.
    pub fn transformed(&self, angle: f64, shift: Vec2) -> Curve {
        let move_pt = |p: Vec2| {
            let r = rotate(p, angle);
            [r[0] + shift[0], r[1] + shift[1]]
        };
        match self {
            Curve::Circle { center, radius, phase } => Curve::Circle {
                center: move_pt(*center),
                radius: *radius,
                phase: phase + angle,
            },
            Curve::Star(s) => Curve::Star(StarCurve {
                center: move_pt(s.center),
                rotation: s.rotation + angle,
                ..s.clone()
            }),
            Curve::Polygon { vertices } => Curve::Polygon {
                vertices: vertices.iter().map(|&p| move_pt(p)).collect(),
            },
        }
    }

    /// Point and derivatives of a smooth curve at parameter `t`.
    pub fn eval(&self, t: f64) -> Option<CurvePoint> {
        match self {
            Curve::Circle { center, radius, phase } => {
                let (s, c) = (t + phase).sin_cos();
                let a = *radius;
                Some(CurvePoint {
                    pos: [center[0] + a * c, center[1] + a * s],
                    d1: [-a * s, a * c],
                    d2: [-a * c, -a * s],
                    d3: [a * s, -a * c],
                })
            }
            Curve::Star(st) => {
                let [r, r1, r2, r3] = st.radius_derivs(t);
                let (s, c) = t.sin_cos();
                let e = [c, s];
                let ep = [-s, c];
                let comb = |a: f64, b: f64| [a * e[0] + b * ep[0], a * e[1] + b * ep[1]];
                let p = comb(r, 0.0);
                let d1 = comb(r1, r);
                let d2 = comb(r2 - r, 2.0 * r1);
                let d3 = comb(r3 - 3.0 * r1, 3.0 * r2 - r);
                let rot = |v: Vec2| rotate(v, st.rotation);
                let pr = rot(p);
                Some(CurvePoint {
                    pos: [st.center[0] + pr[0], st.center[1] + pr[1]],
                    d1: rot(d1),
                    d2: rot(d2),
                    d3: rot(d3),
                })
            }
            Curve::Polygon { .. } => None,
        }
    }

    /// Dense closed polyline through the curve, used for separation bounds
    /// and containment tests.
    fn sample_polyline(&self, samples: usize) -> Vec<Vec2> {
        match self {
            Curve::Polygon { vertices } => {
                let per_side = (samples / vertices.len()).max(1);
                let mut out = Vec::with_capacity(per_side * vertices.len());
                for k in 0..vertices.len() {
                    let a = vertices[k];
                    let b = vertices[(k + 1) % vertices.len()];
                    for j in 0..per_side {
                        let s = j as f64 / per_side as f64;
                        out.push([a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]);
                    }
                }
                out
            }
            _ => (0..samples)
                .map(|j| self.eval(2.0 * PI * j as f64 / samples as f64).unwrap().pos)
                .collect(),
        }
    }
}

fn signed_area(v: &[Vec2]) -> f64 {
    let n = v.len();
    (0..n).map(|k| cross(v[k], v[(k + 1) % n])).sum::<f64>() * 0.5
}

fn segments_intersect(p1: Vec2, p2: Vec2, q1: Vec2, q2: Vec2) -> bool {
    let d1 = cross(sub(p2, p1), sub(q1, p1));
    let d2 = cross(sub(p2, p1), sub(q2, p1));
    let d3 = cross(sub(q2, q1), sub(p1, q1));
    let d4 = cross(sub(q2, q1), sub(p2, q1));
    d1 * d2 <= 0.0 && d3 * d4 <= 0.0
}

fn validate_polygon(v: &[Vec2]) -> Result<()> {
    let n = v.len();
    if n < 3 {
        return Err(Error::geometry("polygon needs at least 3 vertices"));
    }
    if !v.iter().flatten().all(|c| c.is_finite()) {
        return Err(Error::geometry("polygon vertices must be finite"));
    }
    for k in 0..n {
        let a = v[k];
        let b = v[(k + 1) % n];
        let c = v[(k + 2) % n];
        let ab = sub(b, a);
        let bc = sub(c, b);
        if norm(ab) == 0.0 {
            return Err(Error::geometry(format!(
                "polygon has a repeated vertex at index {}",
                (k + 1) % n
            )));
        }
        if cross(ab, bc).abs() <= 1e-12 * norm(ab) * norm(bc) {
            return Err(Error::geometry(format!(
                "polygon vertices {k}..{} are collinear",
                k + 2
            )));
        }
    }
    for i in 0..n {
        for j in i + 2..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            if segments_intersect(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n]) {
                return Err(Error::geometry("polygon is not simple"));
            }
        }
    }
    Ok(())
}

/// Winding number of a closed polyline around `p`.
fn winding_number(p: Vec2, poly: &[Vec2]) -> i32 {
    let n = poly.len();
    let mut w = 0;
    for k in 0..n {
        let a = poly[k];
        let b = poly[(k + 1) % n];
        if a[1] <= p[1] {
            if b[1] > p[1] && cross(sub(b, a), sub(p, a)) > 0.0 {
                w += 1;
            }
        } else if b[1] <= p[1] && cross(sub(b, a), sub(p, a)) < 0.0 {
            w -= 1;
        }
    }
    w
}

/// A collection of disjoint obstacles.
#[derive(Clone, Debug, PartialEq)]
pub struct Configuration {
    pub components: Vec<Curve>,
}

impl Configuration {
    pub fn new(components: Vec<Curve>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::geometry("configuration has no components"));
        }
        for c in &components {
            c.validate()?;
        }
        Ok(Configuration { components })
    }

    pub fn transformed(&self, angle: f64, shift: Vec2) -> Configuration {
        Configuration {
            components: self.components.iter().map(|c| c.transformed(angle, shift)).collect(),
        }
    }

    /// Components reordered so that new position `k` holds old component `order[k]`.
    pub fn permuted(&self, order: &[usize]) -> Configuration {
        Configuration {
            components: order.iter().map(|&k| self.components[k].clone()).collect(),
        }
    }

    pub fn min_separation(&self) -> Result<f64> {
        min_separation(self)
    }
}

fn pair_separation(a: &Curve, b: &Curve) -> Result<f64> {
    if let (
        Curve::Circle {
            center: c1, radius: r1, ..
        },
        Curve::Circle {
            center: c2, radius: r2, ..
        },
    ) = (a, b)
    {
        let d = norm(sub(*c1, *c2)) - r1 - r2;
        if d <= 0.0 {
            return Err(Error::geometry("circles overlap or are nested"));
        }
        return Ok(d);
    }
    let mut samples = 1024;
    loop {
        let pa = a.sample_polyline(samples);
        let pb = b.sample_polyline(samples);
        if pa.iter().any(|&p| winding_number(p, &pb) != 0) || pb.iter().any(|&p| winding_number(p, &pa) != 0) {
            return Err(Error::geometry("components overlap or are nested"));
        }
        let mut dmin = f64::INFINITY;
        for p in &pa {
            for q in &pb {
                dmin = dmin.min(norm(sub(*p, *q)));
            }
        }
        // every curve point lies within half a (slightly inflated) sample gap of a sample
        let gap = |pts: &[Vec2]| {
            (0..pts.len())
                .map(|k| norm(sub(pts[(k + 1) % pts.len()], pts[k])))
                .fold(0.0, f64::max)
                * 0.5
                * 1.01
        };
        let bound = dmin - gap(&pa) - gap(&pb);
        if bound > 0.0 {
            return Ok(bound);
        }
        if dmin <= 0.0 || samples >= 8192 {
            return Err(Error::geometry(format!(
                "components overlap or are too close to certify separation (sampled distance {dmin:e})"
            )));
        }
        samples *= 2;
    }
}

/// Lower bound on the minimal pairwise distance between components.
///
/// Exact for pairs of circles; otherwise the minimal distance between dense
/// polyline samples minus half the largest sample gap of each curve.
pub fn min_separation(config: &Configuration) -> Result<f64> {
    let n = config.components.len();
    if n < 2 {
        return Err(Error::geometry(
            "a single component has no separation; no relative quantity is defined",
        ));
    }
    let mut best = f64::INFINITY;
    for i in 0..n {
        for j in i + 1..n {
            best = best.min(pair_separation(&config.components[i], &config.components[j])?);
        }
    }
    Ok(best)
}

/// Per-component bookkeeping inside a [`BoundaryMesh`].
#[derive(Clone, Debug, PartialEq)]
pub struct ComponentInfo {
    pub range: Range<usize>,
    pub smooth: bool,
}

impl ComponentInfo {
    pub fn len(&self) -> usize {
        self.range.len()
    }

    pub fn is_empty(&self) -> bool {
        self.range.is_empty()
    }
}

/// Nyström discretization of all component boundaries.
///
/// Derivatives are with respect to the curve parameter `t ∈ [0, 2π)`;
/// `weights[j] = speed[j] · 2π/n_c` so that `Σ_j f(x_j) w_j ≈ ∫ f dσ`.
/// On polygons each node carries the exact length of its graded parameter
/// cell and `speed` is that length divided by the parameter step, so side
/// lengths are reproduced to rounding. `d3` is only populated for smooth
/// components.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryMesh {
    pub nodes: Vec<Vec2>,
    pub params: Vec<f64>,
    pub d1: Vec<Vec2>,
    pub d2: Vec<Vec2>,
    pub d3: Vec<Vec2>,
    pub speed: Vec<f64>,
    pub weights: Vec<f64>,
    pub normals: Vec<Vec2>,
    pub tangents: Vec<Vec2>,
    pub curvature: Vec<f64>,
    pub component_id: Vec<usize>,
    pub components: Vec<ComponentInfo>,
}

impl BoundaryMesh {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn all_smooth(&self) -> bool {
        self.components.iter().all(|c| c.smooth)
    }

    pub fn arclength(&self, component: usize) -> f64 {
        self.weights[self.components[component].range.clone()].iter().sum()
    }
}

/// Graded corner map and its first two derivatives.
fn grading(sigma: f64, q: f64) -> [f64; 3] {
    let a = sigma.powf(q);
    let b = (1.0 - sigma).powf(q);
    let a1 = q * sigma.powf(q - 1.0);
    let b1 = -q * (1.0 - sigma).powf(q - 1.0);
    let a2 = q * (q - 1.0) * sigma.powf(q - 2.0);
    let b2 = q * (q - 1.0) * (1.0 - sigma).powf(q - 2.0);
    let s = a + b;
    let num = a1 * b - a * b1;
    let num1 = a2 * b - a * b2;
    let den = s * s;
    let den1 = 2.0 * s * (a1 + b1);
    [a / s, num / den, (num1 * den - num * den1) / (den * den)]
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeshOptions {
    /// Corner grading exponent for polygons.
    pub grading: f64,
}

impl Default for MeshOptions {
    fn default() -> Self {
        MeshOptions {
            grading: DEFAULT_GRADING,
        }
    }
}

/// Discretizes every component with the given node counts.
pub fn discretize(config: &Configuration, n_per_component: &[usize]) -> Result<BoundaryMesh> {
    discretize_with(config, n_per_component, &MeshOptions::default())
}

pub fn discretize_with(config: &Configuration, n_per_component: &[usize], opts: &MeshOptions) -> Result<BoundaryMesh> {
    if n_per_component.len() != config.components.len() {
        return Err(Error::geometry(format!(
            "{} node counts given for {} components",
            n_per_component.len(),
            config.components.len()
        )));
    }
    if !(opts.grading >= 1.0) {
        return Err(Error::geometry("grading exponent must be >= 1"));
    }
    for c in &config.components {
        c.validate()?;
    }
    if config.components.len() >= 2 {
        min_separation(config)?;
    }
    let total: usize = n_per_component.iter().sum();
    let mut mesh = BoundaryMesh {
        nodes: Vec::with_capacity(total),
        params: Vec::with_capacity(total),
        d1: Vec::with_capacity(total),
        d2: Vec::with_capacity(total),
        d3: Vec::with_capacity(total),
        speed: Vec::with_capacity(total),
        weights: Vec::with_capacity(total),
        normals: Vec::with_capacity(total),
        tangents: Vec::with_capacity(total),
        curvature: Vec::with_capacity(total),
        component_id: Vec::with_capacity(total),
        components: Vec::with_capacity(config.components.len()),
    };
    for (cid, (curve, &n)) in config.components.iter().zip(n_per_component).enumerate() {
        if n < 8 {
            return Err(Error::geometry(format!(
                "component {cid}: need at least 8 nodes, got {n}"
            )));
        }
        let start = mesh.nodes.len();
        let h = 2.0 * PI / n as f64;
        match curve {
            Curve::Polygon { vertices } => {
                let sides = vertices.len();
                if n % sides != 0 {
                    return Err(Error::geometry(format!(
                        "component {cid}: node count {n} is not a multiple of the {sides} polygon sides"
                    )));
                }
                let per_side = n / sides;
                let dsig = sides as f64 / (2.0 * PI);
                for k in 0..sides {
                    let a = vertices[k];
                    let e = sub(vertices[(k + 1) % sides], a);
                    for j in 0..per_side {
                        let sigma = (j as f64 + 0.5) / per_side as f64;
                        let [g, g1, g2] = grading(sigma, opts.grading);
                        let t = h * ((k * per_side + j) as f64 + 0.5);
                        let pt = CurvePoint {
                            pos: [a[0] + g * e[0], a[1] + g * e[1]],
                            d1: [e[0] * g1 * dsig, e[1] * g1 * dsig],
                            d2: [e[0] * g2 * dsig * dsig, e[1] * g2 * dsig * dsig],
                            d3: [0.0, 0.0],
                        };
                        push_node(&mut mesh, cid, t, pt, h);
                        // panel weight: exact image length of the parameter cell
                        let lo = grading(j as f64 / per_side as f64, opts.grading)[0];
                        let hi = grading((j + 1) as f64 / per_side as f64, opts.grading)[0];
                        let w = norm(e) * (hi - lo);
                        *mesh.weights.last_mut().unwrap() = w;
                        *mesh.speed.last_mut().unwrap() = w / h;
                    }
                }
            }
            _ => {
                if n % 2 != 0 {
                    return Err(Error::geometry(format!(
                        "component {cid}: smooth components need an even node count, got {n}"
                    )));
                }
                for j in 0..n {
                    let t = h * j as f64;
                    push_node(&mut mesh, cid, t, curve.eval(t).unwrap(), h);
                }
            }
        }
        mesh.components.push(ComponentInfo {
            range: start..mesh.nodes.len(),
            smooth: curve.is_smooth(),
        });
        check_orientation(&mesh, cid)?;
    }
    Ok(mesh)
}

fn push_node(mesh: &mut BoundaryMesh, cid: usize, t: f64, p: CurvePoint, h: f64) {
    let speed = norm(p.d1);
    mesh.nodes.push(p.pos);
    mesh.params.push(t);
    mesh.d1.push(p.d1);
    mesh.d2.push(p.d2);
    mesh.d3.push(p.d3);
    mesh.speed.push(speed);
    mesh.weights.push(speed * h);
    mesh.tangents.push([p.d1[0] / speed, p.d1[1] / speed]);
    mesh.normals.push([p.d1[1] / speed, -p.d1[0] / speed]);
    mesh.curvature.push(cross(p.d1, p.d2) / (speed * speed * speed));
    mesh.component_id.push(cid);
}

/// Checks that a small step along each normal leaves the discretized component.
fn check_orientation(mesh: &BoundaryMesh, cid: usize) -> Result<()> {
    let range = mesh.components[cid].range.clone();
    let poly: Vec<Vec2> = mesh.nodes[range.clone()].to_vec();
    let len: f64 = mesh.weights[range.clone()].iter().sum();
    let eps = 1e-3 * len / poly.len() as f64;
    let area = signed_area(&poly);
    if area <= 0.0 {
        return Err(Error::geometry(format!("component {cid} is not counterclockwise")));
    }
    for j in range.step_by((poly.len() / 8).max(1)) {
        let p = mesh.nodes[j];
        let nu = mesh.normals[j];
        let out = [p[0] + eps * nu[0], p[1] + eps * nu[1]];
        let inn = [p[0] - eps * nu[0], p[1] - eps * nu[1]];
        if winding_number(out, &poly) != 0 || winding_number(inn, &poly) != 1 {
            return Err(Error::geometry(format!(
                "component {cid}: normal at node {j} is not outward"
            )));
        }
    }
    Ok(())
}
