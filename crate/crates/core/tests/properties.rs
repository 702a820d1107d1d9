use std::collections::BTreeSet;

use proptest::prelude::*;

use panoptic3d::dataset::{id_to_rgb, rgb_to_id};
use panoptic3d::io::CocoRle;
use panoptic3d::metrics::panoptic_quality_multi;
use panoptic3d::segmentation::{FusionConfig, SemanticMap};
use panoptic3d::*;

fn observation(mask: BinaryMask, class: u32, score: f64) -> InstanceObservation<f64> {
    InstanceObservation {
        class,
        score,
        modal_mask: mask.clone(),
        amodal_mask: mask,
        mesh_ref: String::new(),
        dz_norm: None,
        inv_zc: None,
        centered: true,
    }
}

fn rect_strategy(w: usize, h: usize) -> impl Strategy<Value = (usize, usize, usize, usize)> {
    (0..w, 0..h).prop_flat_map(move |(x0, y0)| (Just(x0), Just(y0), x0..w, y0..h))
}

fn cloud_strategy() -> impl Strategy<Value = Vec<Point>> {
    prop::collection::vec(
        (-3.0..3.0f64, -3.0..3.0f64, -3.0..3.0f64).prop_map(|(x, y, z)| Point::new(x, y, z)),
        3..20,
    )
}

fn map_strategy(w: usize, h: usize) -> impl Strategy<Value = PanopticMap> {
    (
        prop::collection::vec(0u32..=6, w * h),
        prop::collection::vec(1u32..=3, 6),
    )
        .prop_map(move |(ids, cats)| {
            let infos = (1..=6u32).map(|id| {
                let c = cats[id as usize - 1];
                SegmentInfo { segment_id: id, category_id: c, is_thing: c != 3, score: None }
            });
            PanopticMap::from_raster_pruned(w, h, ids, infos).unwrap()
        })
}

proptest! {
    #[test]
    fn placement_commutes_with_translation(
        pts in cloud_strategy(),
        (tx, ty, tz) in (-2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64),
        rect in rect_strategy(80, 60),
        z_c in 0.5..40.0f64,
    ) {
        let n = pts.len() as u32;
        let mesh = Mesh::new(pts, (0..n - 2).map(|i| [0, i + 1, i + 2]).collect()).unwrap();
        prop_assume!(mesh.bounds().unwrap().extent().y > 1e-6);
        let k = intrinsics_from_fov(60.0, 80, 60).unwrap();
        let (x0, y0, x1, y1) = rect;
        let obs = observation(BinaryMask::rect(80, 60, x0, y0, x1, y1), 1, 1.0);
        let t = Point::new(tx, ty, tz);
        let a = place_mesh(&mesh, &obs, 1, z_c, &k).unwrap();
        let b = place_mesh(&mesh.map_vertices(|p| p.add(t)), &obs, 1, z_c, &k).unwrap();
        prop_assert!((a.scale - b.scale).abs() <= 1e-12 * a.scale);
        for (pa, pb) in a.mesh.vertices.iter().zip(&b.mesh.vertices) {
            let shifted = pa.add(t.scale(a.scale));
            prop_assert!(shifted.distance(*pb) <= 1e-9 * (1.0 + pb.norm()));
        }
    }

    #[test]
    fn z_center_ignores_pixel_order_and_invalid_pixels(
        values in prop::collection::vec(0.2..30.0f64, 1..60),
        seed in any::<u64>(),
        extra_invalid in 0usize..20,
    ) {
        let n = values.len();
        let w = n + extra_invalid;
        let mut depth = values.clone();
        depth.extend(std::iter::repeat(0.0).take(extra_invalid));
        let all = BinaryMask::from_fn(w, 1, |_, _| true);
        let base = estimate_z_center(&DepthMap::from_values(w, 1, depth).unwrap(), &all, 2.0, 98.0).unwrap();

        let mut shuffled = values.clone();
        let mut state = seed;
        for i in (1..n).rev() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            shuffled.swap(i, (state >> 33) as usize % (i + 1));
        }
        let mask = BinaryMask::from_fn(n, 1, |_, _| true);
        let z = estimate_z_center(&DepthMap::from_values(n, 1, shuffled).unwrap(), &mask, 2.0, 98.0).unwrap();
        prop_assert_eq!(z.to_bits(), base.to_bits());
    }

    #[test]
    fn fusion_is_a_deterministic_partition(
        rects in prop::collection::vec((rect_strategy(24, 16), 1u32..4, 0.0..1.0f64), 0..8),
        labels in prop::collection::vec(prop::option::of(10u32..14), 24 * 16),
    ) {
        let (w, h) = (24, 16);
        let instances: Vec<_> = rects
            .iter()
            .map(|&((x0, y0, x1, y1), c, s)| observation(BinaryMask::rect(w, h, x0, y0, x1, y1), c, s))
            .collect();
        let semantic = SemanticMap { width: w, height: h, labels };
        let config = FusionConfig { stuff_min_area: 8, ..FusionConfig::default() };
        let a = fuse_panoptic(&instances, &semantic, &config).unwrap();
        prop_assert_eq!(&a, &fuse_panoptic(&instances, &semantic, &config).unwrap());

        let ids: Vec<u32> = a.segments().iter().map(|s| s.segment_id).collect();
        prop_assert_eq!(ids, (1..=a.segments().len() as u32).collect::<Vec<_>>());
        for s in a.segments() {
            let m = a.mask_of(s.segment_id);
            prop_assert!(m.area() > 0);
            if !s.is_thing {
                prop_assert!(m.iter_set().all(|(x, y)| semantic.labels[y * w + x] == Some(s.category_id)));
            }
        }
        let total: usize = a.areas().values().sum();
        let void = a.ids().iter().filter(|&&i| i == 0).count();
        prop_assert_eq!(total + void, w * h);
    }

    #[test]
    fn no_segment_is_matched_twice(pred in map_strategy(6, 5), gt in map_strategy(6, 5)) {
        for m in panoptic_quality_multi(&pred, &gt, &[0.9, 0.5, 0.3, 0.1]).unwrap() {
            let mut p = BTreeSet::new();
            let mut g = BTreeSet::new();
            for x in &m.matches {
                prop_assert!(p.insert(x.pred_id) && g.insert(x.gt_id));
                prop_assert!(x.iou > m.tau);
            }
            prop_assert!((0.0..=1.0).contains(&m.pq) && (0.0..=1.0).contains(&m.sq) && (0.0..=1.0).contains(&m.rq));
        }
    }

    #[test]
    fn rasterization_ignores_thing_order(
        boxes in prop::collection::vec((rect_strategy(32, 24), 1.0..6.0f64), 1..6),
    ) {
        let k = intrinsics_from_fov(60.0, 32, 24).unwrap();
        let things: Vec<Placed> = boxes
            .iter()
            .enumerate()
            .map(|(i, &((x0, y0, x1, y1), z))| {
                let obs = observation(BinaryMask::rect(32, 24, x0, y0, x1, y1), 1 + i as u32 % 2, 1.0);
                let quad = Mesh::quad((x1 - x0 + 1) as f64, (y1 - y0 + 1) as f64).normalized().unwrap();
                place_mesh(&quad, &obs, 1 + i as u32, z, &k).unwrap()
            })
            .collect();
        let mut reversed = things.clone();
        reversed.reverse();
        let a = rasterize_scene(&Scene::new(Cloud::default(), vec![], things).unwrap(), &k).unwrap();
        let b = rasterize_scene(&Scene::new(Cloud::default(), vec![], reversed).unwrap(), &k).unwrap();
        prop_assert_eq!(a.0, b.0);
        prop_assert_eq!(a.1, b.1);
    }

    #[test]
    fn rle_round_trip(w in 1usize..20, h in 1usize..20, bits in prop::collection::vec(any::<bool>(), 400)) {
        let m = BinaryMask::from_fn(w, h, |x, y| bits[y * 20 + x]);
        let rle = CocoRle::encode(&m);
        prop_assert_eq!(rle.counts.iter().sum::<u64>(), (w * h) as u64);
        prop_assert_eq!(rle.decode().unwrap(), m);
    }

    #[test]
    fn rgb_id_bijection(id in 0u32..(1 << 24)) {
        prop_assert_eq!(rgb_to_id(id_to_rgb(id).unwrap()), id);
    }

    #[test]
    fn enclosing_layout_covers_every_pixel(
        angle in -0.6..0.6f64,
        (ex, ey, ez) in (2.0..6.0f64, 2.0..6.0f64, 2.0..6.0f64),
        (ox, oy, oz) in (-0.4..0.4f64, -0.4..0.4f64, -0.4..0.4f64),
    ) {
        let (s, c) = angle.sin_cos();
        let layout = LayoutBox::from_center_edges(
            Point::new(ox, oy, oz),
            [Point::new(ex * c, ex * s, 0.0), Point::new(-ey * s, ey * c, 0.0), Point::new(0.0, 0.0, ez)],
        );
        let cats = LayoutCategories { wall: 1, ceiling: 2, floor: 3 };
        let faces = layout_box_to_stuff_meshes(&layout, cats).unwrap();
        prop_assert_eq!(faces.iter().map(|(m, _)| m.triangles.len()).sum::<usize>(), 12);
        let stuff_meshes = faces
            .into_iter()
            .map(|(mesh, category_id)| StuffMesh { mesh, segment_id: category_id, category_id })
            .collect();
        let k = intrinsics_from_fov(60.0, 40, 30).unwrap();
        let scene = Scene::new(Cloud::default(), stuff_meshes, vec![]).unwrap();
        let (pan, _) = rasterize_scene(&scene, &k).unwrap();
        prop_assert!(pan.ids().iter().all(|&i| i != 0));
    }
}
