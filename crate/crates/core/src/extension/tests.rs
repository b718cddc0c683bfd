use proptest::prelude::*;

use super::*;
use crate::geometry::{component_selection, rasterize_domain, DomainSpec, Shape};

fn square_hole(n: usize) -> PeriodicDomain {
    rasterize_domain(&DomainSpec::cube_hole(2, 0.25, 0.75), n).unwrap()
}

fn plan_for(dom: &PeriodicDomain, t: f64) -> ExtensionPlan {
    let comp = component_selection(dom).unwrap();
    build_plan(dom, &comp, t).unwrap()
}

fn window_field(plan: &ExtensionPlan, f: impl Fn(&[f64]) -> f64 + Sync + Send) -> GridField {
    let grid = BoxGrid::new(BoxRegion::cube(plan.dim(), 3.0).unwrap(), 1.0 / plan.resolution() as f64).unwrap();
    GridField::from_fn(grid, plan.support_mask().to_vec(), f).unwrap()
}

fn perforated(dom: &PeriodicDomain, omega: BoxRegion, eps: f64, f: impl Fn(&[f64]) -> f64 + Sync + Send) -> GridField {
    let grid = BoxGrid::new(omega, eps / dom.resolution() as f64).unwrap();
    let mask = GridField::perforated_mask(&grid, dom, eps);
    GridField::from_fn(grid, mask, f).unwrap()
}

#[test]
fn smoothstep_endpoints_and_symmetry() {
    assert_eq!(smoothstep(0.0), 0.0);
    assert_eq!(smoothstep(1.0), 1.0);
    assert_eq!(smoothstep(-0.3), 0.0);
    for k in 0..=20 {
        let x = k as f64 / 20.0;
        assert!((smoothstep(x) + smoothstep(1.0 - x) - 1.0).abs() < 1e-15);
    }
}

#[test]
fn partition_of_unity_sums_to_one() {
    let plan = plan_for(&square_hole(16), 0.25);
    let n = 16;
    for gx in -40i64..40 {
        for gy in [-17i64, 0, 5, 31] {
            let x = [(gx as f64 + 0.5) / n as f64, (gy as f64 + 0.5) / n as f64];
            let mut total = 0.0;
            for ax in -5i64..5 {
                for ay in -5i64..5 {
                    let v = plan.psi(&[ax, ay], &x);
                    assert!(v >= 0.0);
                    total += v;
                }
            }
            assert!((total - 1.0).abs() < 1e-12, "{x:?}: {total}");
        }
    }
}

#[test]
fn partition_is_translation_equivariant() {
    let plan = plan_for(&square_hole(16), 0.25);
    for k in 0..32 {
        let s = (k as f64 + 0.5) / 16.0;
        let base = plan.psi(&[0, 0], &[s, 0.5]);
        let moved = plan.psi(&[3, -2], &[s + 3.0, -1.5]);
        assert_eq!(base, moved);
    }
}

#[test]
fn full_space_plan_is_trivial() {
    let dom = rasterize_domain(&DomainSpec::full(2), 8).unwrap();
    let plan = plan_for(&dom, 0.25);
    assert_eq!(plan.collar_count(), 0);
    assert!(plan.nodes().iter().all(|k| *k == LocalNode::Identity));
    assert!((0..plan.nodes().len()).all(|i| plan.phi(i) == 1.0));
}

#[test]
fn box_hole_collar_maps_into_component() {
    let dom = square_hole(16);
    let t = 0.1;
    let plan = plan_for(&dom, t);
    let h = 1.0 / 16.0;
    assert!(plan.collar_count() > 0);
    for (i, node) in plan.nodes().iter().enumerate() {
        if let LocalNode::Collar { source, phi, .. } = *node {
            let c = plan.local_shape().coords(i);
            assert!(plan.support_mask()[plan.support_shape().index(source)]);
            let dist: f64 = (0..2).map(|a| ((c[a] as f64 - source[a] as f64) * h).powi(2)).sum::<f64>().sqrt();
            assert!(dist <= 2.0 * t + 1e-12, "{c:?} -> {source:?}");
            assert!((0.0..=1.0).contains(&phi));
        }
    }
}

#[test]
fn far_nodes_sit_deep_in_the_holes() {
    let dom = square_hole(16);
    let plan = plan_for(&dom, 0.1);
    let spec = dom.spec().unwrap();
    for (i, node) in plan.nodes().iter().enumerate() {
        let c = plan.local_shape().coords(i);
        let x = [(c[0] as f64 + 0.5) / 16.0, (c[1] as f64 + 0.5) / 16.0];
        let sd = spec.signed_distance(&x).0;
        match node {
            LocalNode::Identity => assert!(sd < 0.0),
            LocalNode::Collar { .. } => assert!((0.0..0.1).contains(&sd)),
            LocalNode::Far => assert!(sd >= 0.1),
        }
    }
}

#[test]
fn half_space_hole_is_a_mirror() {
    // near its left face the hole behaves like the half-space {x1 > 0.75}
    let spec = DomainSpec::perforated(2, vec![Shape::Box { lo: vec![0.75, 0.1], hi: vec![0.95, 0.9] }]);
    let dom = rasterize_domain(&spec, 20).unwrap();
    let plan = plan_for(&dom, 0.1);
    let mut seen = 0;
    for (i, node) in plan.nodes().iter().enumerate() {
        if let LocalNode::Collar { source, normal, .. } = *node {
            if normal[0] != 1.0 {
                continue;
            }
            let c = plan.local_shape().coords(i);
            let x1 = (c[0] as f64 + 0.5) / 20.0;
            let y1 = (source[0] as f64 + 0.5) / 20.0;
            let base = x1.floor();
            assert!((y1 - (2.0 * base + 1.5 - x1)).abs() < 1e-12, "{x1} -> {y1}");
            assert_eq!(source[1], c[1]);
            seen += 1;
        }
    }
    assert!(seen > 0);
}

#[test]
fn wide_collar_is_rejected_with_offenders() {
    let dom = rasterize_domain(&DomainSpec::cube_hole(2, 0.1, 0.9), 20).unwrap();
    let comp = component_selection(&dom).unwrap();
    match build_plan(&dom, &comp, 0.4) {
        Err(Error::CollarTooWide { t, offending }) => {
            assert_eq!(t, 0.4);
            assert!(!offending.is_empty());
        }
        other => panic!("expected CollarTooWide, got {other:?}"),
    }
    assert!(build_plan(&dom, &comp, default_collar_width(&dom)).is_ok());
}

#[test]
fn default_collar_is_half_the_hole_gap() {
    assert!((default_collar_width(&square_hole(16)) - 0.25).abs() < 1e-12);
    let narrow = rasterize_domain(&DomainSpec::cube_hole(2, 0.1, 0.9), 20).unwrap();
    assert!((default_collar_width(&narrow) - 0.1).abs() < 1e-12);
    let full = rasterize_domain(&DomainSpec::full(2), 8).unwrap();
    assert_eq!(default_collar_width(&full), FALLBACK_COLLAR);
}

#[test]
fn raw_indicator_domain_needs_a_spec() {
    let spec_dom = square_hole(8);
    let dom = PeriodicDomain::from_indicator(2, 8, spec_dom.indicator().to_vec()).unwrap();
    let comp = component_selection(&dom).unwrap();
    assert!(matches!(build_plan(&dom, &comp, 0.1), Err(Error::InvalidArgument(_))));
}

#[test]
fn local_extension_of_constant_is_constant() {
    let plan = plan_for(&square_hole(16), 0.25);
    let u = window_field(&plan, |_| -2.5);
    let ext = local_extend(&plan, &u).unwrap();
    assert!(ext.values().iter().all(|&v| (v + 2.5).abs() < 1e-14));
    assert_eq!(ext.masked_count(), ext.len());
}

#[test]
fn local_extension_branches() {
    let plan = plan_for(&square_hole(16), 0.1);
    // mean zero over C ∩ 3Q by antisymmetry about x1 = 1.5
    let u = window_field(&plan, |x| x[0] - 1.5);
    let ext = local_extend(&plan, &u).unwrap();
    let v = u.values();
    for (i, node) in plan.nodes().iter().enumerate() {
        let own = plan.support_shape().index(plan.local_shape().coords(i));
        match *node {
            LocalNode::Identity => assert_eq!(ext.values()[i], v[own]),
            LocalNode::Far => assert!(ext.values()[i].abs() < 1e-13),
            LocalNode::Collar { source, phi, .. } => {
                let expect = phi * v[plan.support_shape().index(source)];
                assert!((ext.values()[i] - expect).abs() < 1e-13);
                if phi == 1.0 {
                    assert_eq!(ext.values()[i], v[plan.support_shape().index(source)]);
                }
            }
        }
    }
}

#[test]
fn local_extension_rejects_wrong_mask() {
    let plan = plan_for(&square_hole(8), 0.25);
    let grid = BoxGrid::new(BoxRegion::cube(2, 3.0).unwrap(), 1.0 / 8.0).unwrap();
    let u = GridField::from_fn(grid.clone(), GridField::full_mask(&grid), |_| 1.0).unwrap();
    assert!(local_extend(&plan, &u).is_err());
}

#[test]
fn local_estimates_for_constants() {
    let plan = plan_for(&square_hole(16), 0.25);
    let u = window_field(&plan, |_| 1.75);
    let est = local_estimates(&plan, &u, 2.0).unwrap();
    let support = plan.support_mask().iter().filter(|&&b| b).count() as f64;
    let expect = (32.0 * 32.0) / support; // |2Q| / |C ∩ 3Q| in nodes
    assert!((est.lp_ratio - expect).abs() < 1e-12 * expect);
    assert_eq!(est.energy_ratio, 0.0);
}

#[test]
fn local_estimates_bounded_for_rough_fields() {
    let plan = plan_for(&square_hole(16), 0.25);
    let mut worst = 0.0f64;
    for seed in 0..5 {
        let grid_len = plan.support_shape().len();
        let noise = crate::random::uniform_field(seed, 0, grid_len);
        let grid = BoxGrid::new(BoxRegion::cube(2, 3.0).unwrap(), 1.0 / 16.0).unwrap();
        let mask = plan.support_mask().to_vec();
        let vals = noise.iter().zip(&mask).map(|(&z, &m)| if m { z } else { 0.0 }).collect();
        let u = GridField::new(grid, vals, mask).unwrap();
        let est = local_estimates(&plan, &u, 2.0).unwrap();
        assert!(est.lp_ratio.is_finite() && est.energy_ratio.is_finite());
        worst = worst.max(est.energy_ratio);
    }
    assert!(worst > 0.0 && worst < 1.0, "{worst}");
}

#[test]
fn reflection_is_bi_lipschitz() {
    for spec in [DomainSpec::cube_hole(2, 0.25, 0.75), DomainSpec::ball_hole(vec![0.5, 0.5], 0.3)] {
        let dom = rasterize_domain(&spec, 32).unwrap();
        // radial mirrors stretch tangentially by (ρ + t)/(ρ − t) ≤ 2 for t ≤ ρ/3
        let t = default_collar_width(&dom).min(0.08);
        let comp = component_selection(&dom).unwrap();
        let plan = build_plan(&dom, &comp, t).map_err(|e| format!("{e}")).unwrap();
        let dist = reflection_distortion(&plan, 2.0 / 32.0).unwrap();
        assert!(dist.pairs > 0);
        assert!(dist.min >= 0.5 && dist.max <= 2.0, "{spec:?}: {dist:?}");
        assert!(dist.max_shift <= 1.5 / 32.0, "{dist:?}");
        if matches!(spec.holes[0], Shape::Box { .. }) {
            assert_eq!((dist.snapped_min, dist.snapped_max), (1.0, 1.0));
        }
    }
}

#[test]
fn glue_preserves_constants_and_identity() {
    let dom = square_hole(8);
    let plan = plan_for(&dom, 0.25);
    let omega = BoxRegion::new(vec![-12.0, -12.0], vec![25.0, 25.0]).unwrap();
    let inner = BoxRegion::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
    let c = perforated(&dom, omega.clone(), 1.0, |_| 4.0);
    let lc = glue(&plan, &dom, &c, &inner).unwrap();
    assert!(lc.values().iter().all(|&v| (v - 4.0).abs() < 1e-13));

    let smooth = |x: &[f64]| (x[0] * 0.7).sin() + x[1] * x[1] * 0.1;
    let u = perforated(&dom, omega, 1.0, smooth);
    let lu = glue(&plan, &dom, &u, &inner).unwrap();
    let mask = GridField::perforated_mask(lu.grid(), &dom, 1.0);
    for i in 0..lu.len() {
        let x = lu.grid().center(i);
        if mask[i] {
            assert!((lu.values()[i] - smooth(&x[..2])).abs() < 1e-12);
        }
    }
}

#[test]
fn glue_full_space_is_identity() {
    let dom = rasterize_domain(&DomainSpec::full(2), 8).unwrap();
    let plan = plan_for(&dom, 0.25);
    let omega = BoxRegion::new(vec![-12.0, -12.0], vec![26.0, 26.0]).unwrap();
    let u = perforated(&dom, omega, 1.0, |x| x[0] - 2.0 * x[1]);
    let inner = BoxRegion::new(vec![-0.5, 0.0], vec![2.0, 1.5]).unwrap();
    let lu = glue(&plan, &dom, &u, &inner).unwrap();
    for i in 0..lu.len() {
        let x = lu.grid().center(i);
        assert!((lu.values()[i] - (x[0] - 2.0 * x[1])).abs() < 1e-12);
    }
}

#[test]
fn glue_requires_margin() {
    let dom = square_hole(8);
    let plan = plan_for(&dom, 0.25);
    let omega = BoxRegion::new(vec![0.0, 0.0], vec![20.0, 20.0]).unwrap();
    let u = perforated(&dom, omega, 1.0, |_| 1.0);
    let inner = BoxRegion::new(vec![9.0, 9.0], vec![2.0, 2.0]).unwrap();
    match glue(&plan, &dom, &u, &inner) {
        Err(Error::Margin(msg)) => assert!(msg.contains("C̃"), "{msg}"),
        other => panic!("expected margin error, got {other:?}"),
    }
}

fn scaled_setup() -> (PeriodicDomain, ExtensionPlan, BoxRegion) {
    let dom = square_hole(8);
    let plan = plan_for(&dom, 0.25);
    (dom, plan, BoxRegion::cube(2, 12.0).unwrap())
}

#[test]
fn scaled_extension_keeps_masked_values_bitwise() {
    let (dom, plan, omega) = scaled_setup();
    let eps = 0.25;
    let noise_len = BoxGrid::new(omega.clone(), eps / 8.0).unwrap().len();
    let noise = crate::random::uniform_field(7, 1, noise_len);
    let grid = BoxGrid::new(omega, eps / 8.0).unwrap();
    let mask = GridField::perforated_mask(&grid, &dom, eps);
    let vals = noise.iter().zip(&mask).map(|(&z, &m)| if m { z } else { 0.0 }).collect();
    let u = GridField::new(grid.clone(), vals, mask.clone()).unwrap();
    let tu = scaled_extend(&plan, &dom, &u, eps).unwrap();
    let inner = inner_nodes(&plan, &grid, eps).unwrap();
    let mut kept = 0;
    for i in 0..grid.len() {
        if !inner[i] {
            assert_eq!(tu.values()[i], 0.0);
        } else if mask[i] {
            assert_eq!(tu.values()[i].to_bits(), u.values()[i].to_bits());
            kept += 1;
        }
    }
    assert!(kept > 0);
    assert_eq!(tu.masked_count(), tu.len());
}

#[test]
fn scaled_extension_of_constant() {
    let (dom, plan, omega) = scaled_setup();
    let u = perforated(&dom, omega, 0.25, |_| -0.75);
    let tu = scaled_extend(&plan, &dom, &u, 0.25).unwrap();
    let inner = inner_nodes(&plan, u.grid(), 0.25).unwrap();
    for i in 0..tu.len() {
        let expect = if inner[i] { -0.75 } else { 0.0 };
        assert!((tu.values()[i] - expect).abs() < 1e-13);
    }
    let est = theorem_estimates(&plan, &u, &tu, 0.25, 0.25, 2.0).unwrap();
    assert_eq!(est.c2, 0.0);
}

#[test]
fn scaled_extension_rejects_large_eps() {
    let (dom, plan, omega) = scaled_setup();
    let u = perforated(&dom, omega, 0.5, |_| 1.0);
    match scaled_extend(&plan, &dom, &u, 0.5) {
        Err(e @ Error::Margin(_)) => {
            assert!(e.to_string().contains("eps*k0"));
            assert_eq!(e.category().exit_code(), 3);
        }
        other => panic!("expected margin error, got {other:?}"),
    }
}

#[test]
fn linear_field_extension_converges() {
    let dom = square_hole(8);
    let plan = plan_for(&dom, 0.25);
    let omega = BoxRegion::cube(2, 12.0).unwrap();
    let mut errs = Vec::new();
    for eps in [0.25, 0.125] {
        let u = perforated(&dom, omega.clone(), eps, |x| x[0] + 0.5 * x[1]);
        let tu = scaled_extend(&plan, &dom, &u, eps).unwrap();
        let inner = inner_nodes(&plan, u.grid(), eps).unwrap();
        let (mut e, mut norm) = (0.0, 0.0);
        for i in 0..tu.len() {
            if inner[i] {
                let x = tu.grid().center(i);
                let lin = x[0] + 0.5 * x[1];
                e += (tu.values()[i] - lin).powi(2);
                norm += lin * lin;
            }
        }
        errs.push((e / norm).sqrt());
    }
    assert!(errs[1] < 0.75 * errs[0], "{errs:?}");
    assert!(errs[1] < 0.01, "{errs:?}");
}

#[test]
fn counterexample_needs_the_margin() {
    let rep = slab_counterexample(64, 0.1, 2.0).unwrap();
    assert!(rep.unmargined.numerator > 0.0);
    assert_eq!(rep.unmargined.denominator, 0.0);
    assert_eq!(rep.unmargined.ratio, f64::INFINITY);
    assert!(rep.margined.ratio.is_finite());
}

#[test]
fn ratio_conventions() {
    assert_eq!(ratio(0.0, 0.0), 0.0);
    assert_eq!(ratio(1.0, 0.0), f64::INFINITY);
    assert_eq!(ratio(1.0, 4.0), 0.25);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn scaled_extension_is_linear(a in -3.0f64..3.0, b in -3.0f64..3.0, s1 in 0u64..1000, s2 in 0u64..1000) {
        let dom = square_hole(8);
        let plan = plan_for(&dom, 0.25);
        let eps = 0.25;
        let grid = BoxGrid::new(BoxRegion::cube(2, 12.0).unwrap(), eps / 8.0).unwrap();
        let mask = GridField::perforated_mask(&grid, &dom, eps);
        let make = |seed: u64| {
            let z = crate::random::uniform_field(seed, 3, grid.len());
            let vals = z.iter().zip(&mask).map(|(&z, &m)| if m { z } else { 0.0 }).collect();
            GridField::new(grid.clone(), vals, mask.clone()).unwrap()
        };
        let (u, v) = (make(s1), make(s2));
        let combo = u.with_values(u.values().iter().zip(v.values()).map(|(x, y)| a * x + b * y).collect()).unwrap();
        let (tu, tv, tc) = (
            scaled_extend(&plan, &dom, &u, eps).unwrap(),
            scaled_extend(&plan, &dom, &v, eps).unwrap(),
            scaled_extend(&plan, &dom, &combo, eps).unwrap(),
        );
        for i in 0..grid.len() {
            let expect = a * tu.values()[i] + b * tv.values()[i];
            let scale = a.abs() * tu.values()[i].abs() + b.abs() * tv.values()[i].abs() + 1e-300;
            prop_assert!((tc.values()[i] - expect).abs() <= 1e-12 * scale.max(1.0));
        }
    }
}
