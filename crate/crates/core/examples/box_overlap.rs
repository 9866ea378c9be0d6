//! Box geometry: areas, overlaps and the invariances the linker relies on.

use tubelink::geometry::BBox;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let a = BBox::new(0.0, 0.0, 10.0, 10.0)?;
    let b = BBox::new(5.0, 0.0, 15.0, 10.0)?;
    let far = BBox::new(20.0, 20.0, 30.0, 30.0)?;

    println!("area(a)        = {}", a.area());
    println!("iou(a, b)      = {:.4}", a.iou(&b));
    println!("iou(a, far)    = {}", a.iou(&far));
    println!("iou(a, a)      = {}", a.iou(&a));

    // overlap survives shifting and scaling both boxes together
    let (sa, sb) = (a.translate(100.0, -3.5)?, b.translate(100.0, -3.5)?);
    println!("shifted iou    = {:.4}", sa.iou(&sb));
    println!(
        "scaled iou     = {:.4}",
        a.scale(0.25)?.iou(&b.scale(0.25)?)
    );

    // zero-area and non-finite boxes never get built
    println!("degenerate box = {:?}", BBox::new(1.0, 1.0, 1.0, 5.0).err());
    println!(
        "from center    = {:?}",
        BBox::from_center(5.0, 5.0, 4.0, 2.0)?.to_array()
    );
    Ok(())
}
