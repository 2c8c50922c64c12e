//! Built-in test geometries.

use super::{BoundaryTag, Mesh2D};
use crate::error::{Error, Result};
use crate::linalg::Vec2;
use crate::scalar::Real;

/// Stitches two concentric node rings (`inner` may be a single centre node)
/// into counter-clockwise triangles, advancing by angular order.
fn zip_rings(inner: &[usize], outer: &[usize], tris: &mut Vec<[usize; 3]>) {
    let (m, n) = (inner.len(), outer.len());
    if m == 1 {
        for j in 0..n {
            tris.push([inner[0], outer[j], outer[(j + 1) % n]]);
        }
        return;
    }
    let (mut i, mut j) = (0usize, 0usize);
    while i < m || j < n {
        // Next angles are (i+1)/m and (j+1)/n of a full turn; compare exactly.
        let advance_outer = j < n && (i >= m || (j + 1) * m <= (i + 1) * n);
        if advance_outer {
            tris.push([inner[i % m], outer[j % n], outer[(j + 1) % n]]);
            j += 1;
        } else {
            tris.push([inner[i % m], outer[j % n], inner[(i + 1) % m]]);
            i += 1;
        }
    }
}

fn ring<T: Real>(verts: &mut Vec<Vec2<T>>, radius: T, count: usize) -> Vec<usize> {
    let start = verts.len();
    for j in 0..count {
        let theta = T::TAU() * T::of_usize(j) / T::of_usize(count);
        verts.push(Vec2::new(radius * theta.cos(), radius * theta.sin()));
    }
    (start..start + count).collect()
}

fn check_fraction<T: Real>(fraction: T) -> Result<()> {
    if !(fraction > T::zero() && fraction <= T::one()) {
        return Err(Error::InvalidParameter(format!("dirichlet_fraction {fraction} not in (0, 1]")));
    }
    Ok(())
}

/// Splits a closed ring of boundary nodes into a leading Dirichlet arc and
/// a trailing Neumann arc.
fn tag_ring<T: Real>(nodes: &[usize], fraction: T) -> Vec<(usize, usize, BoundaryTag)> {
    let n = nodes.len();
    let nd = (fraction * T::of_usize(n)).round().to_usize().unwrap_or(n).clamp(1, n);
    (0..n)
        .map(|j| {
            let tag = if j < nd { BoundaryTag::Dirichlet } else { BoundaryTag::Neumann };
            (nodes[j], nodes[(j + 1) % n], tag)
        })
        .collect()
}

fn disk_rings<T: Real>(radius: T, rings: usize) -> (Vec<Vec2<T>>, Vec<[usize; 3]>, Vec<usize>) {
    let mut verts = vec![Vec2::zero()];
    let mut tris = Vec::with_capacity(6 * rings * rings);
    let mut prev = vec![0usize];
    for k in 1..=rings {
        let r = radius * T::of_usize(k) / T::of_usize(rings);
        let cur = ring(&mut verts, r, 6 * k);
        zip_rings(&prev, &cur, &mut tris);
        prev = cur;
    }
    (verts, tris, prev)
}

/// Quasi-uniform disk centred at the origin: concentric rings of `6k`
/// nodes. The boundary arc starting at angle 0 and covering
/// `dirichlet_fraction` of the circle is Dirichlet, the rest Neumann.
pub fn generate_disk<T: Real>(radius: T, h: T, dirichlet_fraction: T) -> Result<Mesh2D<T>> {
    if !(radius > T::zero()) || !(h > T::zero() && h < radius) {
        return Err(Error::InvalidParameter(format!("disk needs 0 < h < radius (h={h}, radius={radius})")));
    }
    check_fraction(dirichlet_fraction)?;
    let rings = (radius / h).ceil().to_usize().unwrap_or(1).max(1);
    let (verts, tris, outer) = disk_rings(radius, rings);
    Mesh2D::new(verts, tris, &tag_ring(&outer, dirichlet_fraction))
}

/// Ellipse with semi-axes `a` (along x) and `b`, an affine image of the
/// ring disk.
pub fn generate_ellipse<T: Real>(a: T, b: T, h: T, dirichlet_fraction: T) -> Result<Mesh2D<T>> {
    if !(a > T::zero() && b > T::zero()) || !(h > T::zero() && h < a.min(b)) {
        return Err(Error::InvalidParameter(format!("ellipse needs 0 < h < min(a, b) (a={a}, b={b}, h={h})")));
    }
    check_fraction(dirichlet_fraction)?;
    let rings = (a.max(b) / h).ceil().to_usize().unwrap_or(1).max(1);
    let (verts, tris, outer) = disk_rings(T::one(), rings);
    let verts = verts.into_iter().map(|p| Vec2::new(a * p.x, b * p.y)).collect();
    Mesh2D::new(verts, tris, &tag_ring(&outer, dirichlet_fraction))
}

/// Annulus `r_inner < |x| < r_outer` with one tag per boundary circle.
pub fn generate_annulus<T: Real>(
    r_inner: T,
    r_outer: T,
    h: T,
    inner_tag: BoundaryTag,
    outer_tag: BoundaryTag,
) -> Result<Mesh2D<T>> {
    if !(r_inner > T::zero() && r_outer > r_inner) || !(h > T::zero() && h < r_outer - r_inner) {
        return Err(Error::InvalidParameter(format!(
            "annulus needs 0 < r_inner < r_outer and 0 < h < width (got {r_inner}, {r_outer}, {h})"
        )));
    }
    let layers = ((r_outer - r_inner) / h).ceil().to_usize().unwrap_or(1).max(1);
    let mut verts = Vec::new();
    let mut tris = Vec::new();
    let count = |r: T| (T::TAU() * r / h).ceil().to_usize().unwrap_or(6).max(6);
    let first = ring(&mut verts, r_inner, count(r_inner));
    let mut prev = first.clone();
    for k in 1..=layers {
        let r = r_inner + (r_outer - r_inner) * T::of_usize(k) / T::of_usize(layers);
        let cur = ring(&mut verts, r, count(r));
        zip_rings(&prev, &cur, &mut tris);
        prev = cur;
    }
    let mut bnd = Vec::new();
    for j in 0..first.len() {
        bnd.push((first[j], first[(j + 1) % first.len()], inner_tag));
    }
    for j in 0..prev.len() {
        bnd.push((prev[j], prev[(j + 1) % prev.len()], outer_tag));
    }
    Mesh2D::new(verts, tris, &bnd)
}

/// Rectangle `[0, width] × [0, height]` on a structured grid; `side_tags`
/// are ordered bottom, right, top, left.
pub fn generate_rectangle<T: Real>(
    width: T,
    height: T,
    h: T,
    side_tags: [BoundaryTag; 4],
) -> Result<Mesh2D<T>> {
    if !(width > T::zero() && height > T::zero()) || !(h > T::zero() && h <= width.min(height)) {
        return Err(Error::InvalidParameter(format!(
            "rectangle needs positive sides and 0 < h <= min side (got {width}, {height}, {h})"
        )));
    }
    let nx = (width / h).ceil().to_usize().unwrap_or(1).max(1);
    let ny = (height / h).ceil().to_usize().unwrap_or(1).max(1);
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut verts = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            verts.push(Vec2::new(
                width * T::of_usize(i) / T::of_usize(nx),
                height * T::of_usize(j) / T::of_usize(ny),
            ));
        }
    }
    let mut tris = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            tris.push([a, b, c]);
            tris.push([a, c, d]);
        }
    }
    let mut bnd = Vec::new();
    for i in 0..nx {
        bnd.push((id(i, 0), id(i + 1, 0), side_tags[0]));
        bnd.push((id(i, ny), id(i + 1, ny), side_tags[2]));
    }
    for j in 0..ny {
        bnd.push((id(nx, j), id(nx, j + 1), side_tags[1]));
        bnd.push((id(0, j), id(0, j + 1), side_tags[3]));
    }
    Mesh2D::new(verts, tris, &bnd)
}
