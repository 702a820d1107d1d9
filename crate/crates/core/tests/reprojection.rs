use panoptic3d::pipeline::{SceneInputs, ThingInput};
use panoptic3d::*;

const W: usize = 48;
const H: usize = 36;

/// Stuff everywhere at 9 m, one 12x10 thing at 3 m whose placed quad is
/// pushed `shift` pixels to the right.
fn scene(shift: usize) -> (Scene, PanopticMap, Camera) {
    let (x0, y0, x1, y1) = (10, 8, 21, 17);
    let inside = |i: usize| (x0..=x1).contains(&(i % W)) && (y0..=y1).contains(&(i / W));
    let ids = (0..W * H).map(|i| if inside(i) { 2 } else { 1 }).collect();
    let depth = (0..W * H).map(|i| if inside(i) { 3.0 } else { 9.0 }).collect();
    let gt = PanopticMap::new(
        W,
        H,
        ids,
        vec![
            SegmentInfo { segment_id: 1, category_id: 40, is_thing: false, score: None },
            SegmentInfo { segment_id: 2, category_id: 5, is_thing: true, score: None },
        ],
    )
    .unwrap();
    let k = intrinsics_from_fov(60.0, W, H).unwrap();
    let inputs = SceneInputs {
        camera: k,
        depth: DepthMap::from_values(W, H, depth).unwrap(),
        panoptic: gt.clone(),
        things: vec![ThingInput {
            segment_id: 2,
            mesh_ref: "quad".into(),
            mesh: Mesh::quad(12.0, 10.0),
            modal_mask: None,
            amodal_mask: Some(BinaryMask::rect(W, H, x0 + shift, y0, x1 + shift, y1)),
            inv_zc: None,
            dz_norm: None,
        }],
        layout: None,
    };
    (assemble_scene(&inputs, &AssemblyOptions::default()).unwrap().scene, gt, k)
}

fn thing_pq(m: &metrics::PanopticMetrics) -> f64 {
    m.per_class.iter().find(|c| c.category_id == 5).unwrap().quality.pq
}

#[test]
fn unshifted_scene_reproduces_ground_truth() {
    let (s, gt, k) = scene(0);
    let (pred, _) = rasterize_scene(&s, &k).unwrap();
    assert_eq!(pred.ids(), gt.ids());
    for m in evaluate_reprojection(&s, &gt, &k, &DEFAULT_TAUS).unwrap() {
        assert_eq!((m.pq, m.sq, m.rq), (1.0, 1.0, 1.0));
    }
}

#[test]
fn shifted_thing_matches_only_below_one_half() {
    // 4 of 12 columns shifted: IoU = 8 / 16
    let (s, gt, k) = scene(4);
    let m = evaluate_reprojection(&s, &gt, &k, &DEFAULT_TAUS).unwrap();
    assert_eq!(thing_pq(&m[0]), 0.0);
    assert_eq!(thing_pq(&m[1]), 0.5);
    assert_eq!(thing_pq(&m[2]), 0.5);
    assert!(m[0].pq < m[1].pq && m[1].pq == m[2].pq);
}

#[test]
fn empty_scene_scores_zero() {
    let (_, gt, k) = scene(0);
    for m in evaluate_reprojection(&Scene::default(), &gt, &k, &DEFAULT_TAUS).unwrap() {
        assert_eq!(m.pq, 0.0);
        assert_eq!(m.pooled.fn_, 2);
    }
}
