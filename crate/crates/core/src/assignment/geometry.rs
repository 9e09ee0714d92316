use crate::graph::BoundingBox;
use crate::scalar::Scalar;

/// Intersection over union; 0 for disjoint boxes.
pub fn iou<T: Scalar>(a: &BoundingBox<T>, b: &BoundingBox<T>) -> T {
    let iw = (a.x2.min(b.x2) - a.x1.max(b.x1)).max(T::zero());
    let ih = (a.y2.min(b.y2) - a.y1.max(b.y1)).max(T::zero());
    let inter = iw * ih;
    if inter == T::zero() {
        return T::zero();
    }
    let union = a.area() + b.area() - inter;
    (inter / union).min(T::one())
}

/// L1 distance between corner coordinates, x terms divided by `width` and y
/// terms by `height`. Lies in `[0, 4]` for in-frame boxes.
pub fn l1_norm<T: Scalar>(a: &BoundingBox<T>, b: &BoundingBox<T>, width: T, height: T) -> T {
    ((a.x1 - b.x1).abs() + (a.x2 - b.x2).abs()) / width
        + ((a.y1 - b.y1).abs() + (a.y2 - b.y2).abs()) / height
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bb<T: Scalar>(x1: f64, y1: f64, x2: f64, y2: f64) -> BoundingBox<T> {
        BoundingBox::new(T::lit(x1), T::lit(y1), T::lit(x2), T::lit(y2)).unwrap()
    }

    #[test]
    fn iou_examples() {
        let a = bb::<f64>(0.0, 0.0, 2.0, 2.0);
        assert_eq!(iou(&a, &a), 1.0);
        assert_eq!(iou(&a, &bb(5.0, 5.0, 6.0, 6.0)), 0.0);
        assert_eq!(iou(&a, &bb(2.0, 0.0, 3.0, 2.0)), 0.0);
        // inter 2, union 6
        assert_eq!(iou(&a, &bb(1.0, 0.0, 3.0, 2.0)), 1.0 / 3.0);
        let a32 = bb::<f32>(0.0, 0.0, 2.0, 2.0);
        assert!((iou(&a32, &bb(1.0, 0.0, 3.0, 2.0)) - 1.0 / 3.0).abs() < 1e-6);
    }

    #[test]
    fn l1_examples() {
        let a = bb::<f64>(0.0, 0.0, 10.0, 10.0);
        assert_eq!(l1_norm(&a, &a, 100.0, 100.0), 0.0);
        assert_eq!(l1_norm(&a, &bb(5.0, 0.0, 15.0, 10.0), 100.0, 100.0), 0.1);
        assert_eq!(l1_norm(&a, &bb(100.0, 0.0, 110.0, 10.0), 100.0, 100.0), 2.0);
    }

    proptest! {
        #[test]
        fn symmetric_and_bounded(
            (ax, ay, aw, ah) in (0.0f64..90.0, 0.0f64..90.0, 0.5f64..10.0, 0.5f64..10.0),
            (bx, by, bw, bh) in (0.0f64..90.0, 0.0f64..90.0, 0.5f64..10.0, 0.5f64..10.0),
        ) {
            let a = bb::<f64>(ax, ay, ax + aw, ay + ah);
            let b = bb::<f64>(bx, by, bx + bw, by + bh);
            prop_assert_eq!(iou(&a, &b), iou(&b, &a));
            prop_assert!((0.0..=1.0).contains(&iou(&a, &b)));
            prop_assert_eq!(l1_norm(&a, &b, 100.0, 100.0), l1_norm(&b, &a, 100.0, 100.0));
            prop_assert!(l1_norm(&a, &b, 100.0, 100.0) <= 4.0);
        }
    }
}
