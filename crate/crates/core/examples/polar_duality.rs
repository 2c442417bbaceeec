//! Polar bodies and support cones of a convex polygon: the unit section of
//! the support function is the polar body, and polarity is an involution.

use mafb::body::{circle_directions, convex_hull, hausdorff, polar_body, support_cone, ConvexBody2D, Point};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let k = convex_hull(&[
        Point::new(1.0, 0.0),
        Point::new(0.4, 0.9),
        Point::new(-0.8, 0.6),
        Point::new(-0.7, -0.5),
        Point::new(0.3, -1.1),
    ]);
    let polar = polar_body(&k)?;
    println!("K has area {:.4}, its polar {:.4}", k.area(), polar.area());
    let back = polar_body(&polar)?;
    println!("polar of the polar vs K: {:.2e}", hausdorff(&back.vertices, &k.vertices));
    let cone = support_cone(&k, &circle_directions(720))?;
    let section = cone.section()?;
    println!("unit section of h_K vs polar: {:.2e}", hausdorff(&section.vertices, &polar.vertices));
    let disk = ConvexBody2D::regular(256, 0.5);
    let inv = polar_body(&disk)?;
    let radii = inv.vertices.iter().map(|p| p.norm());
    println!("polar of a radius-1/2 disk has radius ~{:.4}", radii.fold(0.0, f64::max));
    Ok(())
}
