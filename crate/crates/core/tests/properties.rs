use heatcloak_core::kernel::{kernel_value, Diffusivity};
use heatcloak_core::reproduction::{exterior_reproduce, interior_reproduce, perturb_density, point_source_traces};
use heatcloak_core::{discretize, make_curve, region_mask, uniform_grid, vec2, PointSource, Rect, Shape, SpaceTimeDensity, TimeGrid};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn kernel_solves_the_heat_equation(x in -1.0f64..1.0, y in -1.0f64..1.0, t in 0.01f64..2.0, k in 0.05f64..1.0) {
        let kd = Diffusivity::new(k).unwrap();
        let p = vec2(x, y);
        let h = f64::EPSILON.cbrt() * (k * t).sqrt();
        let ht = f64::EPSILON.cbrt() * t;
        let f = |q, s| kernel_value(q, s, kd);
        let ut = (f(p, t + ht) - f(p, t - ht)) / (2.0 * ht);
        let (ex, ey) = (vec2(h, 0.0), vec2(0.0, h));
        let lap = (f(p + ex, t) + f(p - ex, t) + f(p + ey, t) + f(p - ey, t) - 4.0 * f(p, t)) / (h * h);
        let scale = f(p, t).abs().max(1.0) / t;
        prop_assert!((ut - k * lap).abs() <= 1e-4 * scale, "ut {ut} k lap {}", k * lap);
        prop_assert!(f(p, t) > 0.0);
        prop_assert_eq!(f(p, t), f(-p, t));
    }

    #[test]
    fn exterior_reproduction_negates_interior(sx in 0.0f64..1.0, sy in 0.0f64..1.0, j in 1usize..=20) {
        let curve = make_curve(Shape::Circle { center: vec2(0.5, 0.5), radius: 0.25 }).unwrap();
        let mesh = discretize(&curve, 24).unwrap();
        let tg = TimeGrid::from_final_time(0.1, 20).unwrap();
        let k = Diffusivity::new(0.3).unwrap();
        let traces = point_source_traces(&PointSource::new(vec2(sx, sy)), &mesh, &tg, k).unwrap();
        let pts = [vec2(0.5, 0.5), vec2(0.1, 0.9), vec2(0.7, 0.52)];
        let a = interior_reproduce(&traces, &mesh, &pts, &tg, j, k).unwrap();
        let b = exterior_reproduce(&traces, &mesh, &pts, &tg, j, k).unwrap();
        for (u, v) in a.iter().zip(&b) {
            prop_assert_eq!(*u, -*v);
        }
    }

    #[test]
    fn buffer_masks_nest(cx in 0.3f64..0.7, cy in 0.3f64..0.7, r in 0.05f64..0.25, s in 0.01f64..0.5) {
        let grid = uniform_grid(Rect::unit_square(), 40, 40).unwrap();
        let curve = make_curve(Shape::Circle { center: vec2(cx, cy), radius: r }).unwrap();
        let inner = region_mask(&grid, &curve, -s).unwrap();
        let plain = region_mask(&grid, &curve, 0.0).unwrap();
        let outer = region_mask(&grid, &curve, s).unwrap();
        prop_assert!(inner.is_subset_of(&plain));
        prop_assert!(plain.is_subset_of(&outer));
    }

    #[test]
    fn noise_is_seeded(seed in any::<u64>(), fraction in 0.0f64..0.1) {
        let d = SpaceTimeDensity::from_fn(6, 5, |m, s| (m as f64 + 1.0) * (s as f64 - 2.0));
        let a = perturb_density(&d, fraction, seed).unwrap();
        prop_assert_eq!(&a, &perturb_density(&d, fraction, seed).unwrap());
        if fraction == 0.0 {
            prop_assert_eq!(&a, &d);
        }
    }

    #[test]
    fn steps_invert_evaluation_times(t_end in 0.01f64..5.0, m in 1usize..2000, frac in 0.0f64..=1.0) {
        let tg = TimeGrid::from_final_time(t_end, m).unwrap();
        let j = (frac * m as f64).round() as usize;
        prop_assert_eq!(tg.step_at(tg.eval_time(j)).unwrap(), j);
    }
}
