use std::collections::BTreeSet;

use nalgebra::{Rotation2, Vector2};
use rotgrasp_core::config::PipelineConfig;
use rotgrasp_core::contact::{detect_stable_contact, ContactKind};
use rotgrasp_core::contour::extract_contour;
use rotgrasp_core::cor::Stability;
use rotgrasp_core::motion::{classify_frame, MotionClass, MotionVectorSet};
use rotgrasp_core::pipeline::{run_sequence, Tracker};
use rotgrasp_core::sim::{
    object_menu, oracle_outcome, simulate_grasp, wrench, Footprint, SimObject, SimParams, GRAVITY,
};

fn rod() -> SimObject {
    object_menu().into_iter().find(|o| o.name == "rod").unwrap()
}

/// Slip model written out per frame of lift: the load ramps in linearly,
/// twist is elastic up to the slip torque and slip accumulates beyond it.
fn closed_form_angle(torque: f64, slip_torque: f64, p: &SimParams, lift_frame: usize) -> f64 {
    let n = lift_frame + 1;
    let ramp = p.load_frames;
    let mut slip = 0.0;
    // load j/ramp during the ramp, full afterwards
    for j in 1..=n.min(ramp) {
        slip += (torque * j as f64 / ramp as f64 - slip_torque).max(0.0);
    }
    if n > ramp {
        slip += (n - ramp) as f64 * (torque - slip_torque).max(0.0);
    }
    let load = (n as f64 / ramp as f64).min(1.0);
    let elastic = p.gel_shear_compliance * (torque * load).min(slip_torque);
    (elastic + p.slip_rate * slip).min(p.max_angle_deg)
}

#[test]
fn lift_angle_matches_the_closed_form() {
    let object = rod();
    assert_eq!(object.mass, 0.20);
    let p = SimParams::default();
    let offset = -0.10;
    let g = simulate_grasp(&object, &p, offset, 90).unwrap();
    let torque = object.mass * GRAVITY * 0.10;
    let slip_torque = object.mass * GRAVITY * object.stability_radius;
    let mut crossing = None;
    for (f, gt) in g.ground_truth.iter().enumerate() {
        let want = if f < p.lift_start_frame {
            0.0
        } else {
            closed_form_angle(torque, slip_torque, &p, f - p.lift_start_frame)
        };
        assert!((gt.angle_deg - want).abs() < 1e-9, "frame {f}: {} vs {want}", gt.angle_deg);
        if crossing.is_none() && want > 5.0 {
            crossing = Some(f);
        }
    }
    // cog sits on the positive side of the grasp: clockwise
    assert!(g.ground_truth.iter().all(|gt| gt.angle_deg >= 0.0));
    assert!(g.ground_truth.windows(2).all(|w| w[1].angle_deg >= w[0].angle_deg));
    assert_eq!(g.true_onset(), Some(p.lift_start_frame));
    let crossing = crossing.expect("crosses 5 degrees");
    assert!(crossing > p.lift_start_frame && crossing < 90);
    assert!(g.ground_truth[crossing - 1].angle_deg <= 5.0);
}

#[test]
fn detected_onset_follows_true_onset() {
    let object = rod();
    let cfg = PipelineConfig::default();
    for seed in 0..20 {
        let p = SimParams { seed, ..SimParams::default() };
        let g = simulate_grasp(&object, &p, -0.10, 90).unwrap();
        let out = run_sequence(&g.frames, &g.renderer, &cfg).unwrap();
        let onset = out.onset_position.expect("onset found");
        let truth = g.true_onset().unwrap();
        assert!(onset.abs_diff(truth) <= 5, "seed {seed}: onset {onset} vs {truth}");
        assert_eq!(out.verdict.stability, Stability::RotationalFailure);
    }
}

#[test]
fn soft_stable_lands_at_closure_for_every_object() {
    let cfg = PipelineConfig::default();
    for object in object_menu() {
        for seed in 0..10 {
            let p = SimParams { seed, ..SimParams::default() };
            let g = simulate_grasp(&object, &p, 0.0, 40).unwrap();
            let s = detect_stable_contact(&g.frames, &cfg);
            assert_eq!(s.kind, ContactKind::SoftStable, "{} seed {seed}", object.name);
            let pos = s.position.unwrap();
            assert!(
                pos.abs_diff(g.closure_complete_frame) <= 2,
                "{} seed {seed}: stable at {pos}, closed at {}",
                object.name,
                g.closure_complete_frame
            );
        }
    }
}

#[test]
fn blob_frames_carry_the_commanded_axis() {
    let object = wrench();
    let Footprint::SmallBlob { axis_deg, .. } = object.footprint else {
        panic!("wrench has a blob footprint")
    };
    let p = SimParams::default();
    let g = simulate_grasp(&object, &p, 0.04, 90).unwrap();
    let cfg = PipelineConfig::default();
    let reference = g.renderer.render(0);
    for pos in [20, 35, 50, 89] {
        let c = extract_contour(&g.renderer.render(pos), &reference, &cfg).unwrap();
        let want = (axis_deg + g.ground_truth[pos].angle_deg).rem_euclid(180.0);
        let got = c.axis_deg().unwrap();
        let err = (got - want + 90.0).rem_euclid(180.0) - 90.0;
        assert!(err.abs() <= 1.0, "frame {pos}: axis {got} vs {want}");
    }
}

#[test]
fn mean_marker_motion_is_the_rigid_turn() {
    // without lag and creep the noise averages out to the rigid model
    let object = rod();
    let base = SimParams {
        adhesion_lag_deg: 0.0,
        creep_px: 0.0,
        ..SimParams::default()
    };
    let offset = -0.10;
    let n_seeds = 120;
    let frame = 70;
    let first = simulate_grasp(&object, &base, offset, 90).unwrap();
    let ids = first.contact_ids.clone();
    let mut sum = vec![Vector2::zeros(); ids.len()];
    for seed in 0..n_seeds {
        let p = SimParams { seed, ..base.clone() };
        let g = simulate_grasp(&object, &p, offset, 90).unwrap();
        for (k, &id) in ids.iter().enumerate() {
            sum[k] += g.frames[frame].marker(id).unwrap().pos();
        }
    }
    let center = base.grip_center();
    let theta = first.ground_truth[frame].angle_deg.to_radians();
    let grid = base.grid();
    for (k, &id) in ids.iter().enumerate() {
        let rest = grid[id as usize] - center;
        let want = center + (1.0 + base.closure_dilation) * (Rotation2::new(theta) * rest);
        let mean = sum[k] / n_seeds as f64;
        assert!((mean - want).norm() < 0.05, "marker {id}: {mean:?} vs {want:?}");
    }
}

#[test]
fn four_marker_edge_grasp_is_small_area() {
    let object = SimObject {
        footprint: Footprint::Flat {
            width_px: 76.0,
            height_px: 76.0,
        },
        ..rod()
    };
    let g = simulate_grasp(&object, &SimParams::default(), 0.0, 40).unwrap();
    assert_eq!(g.contact_ids.len(), 4);
    let cfg = PipelineConfig {
        min_contact_markers: 6,
        ..PipelineConfig::default()
    };
    let mut t = Tracker::new(cfg);
    for f in &g.frames {
        t.push(f.clone(), &g.renderer).unwrap();
    }
    let contact = t.contact().expect("contact established");
    assert!(contact.small_area);
    let want: BTreeSet<u32> = g.contact_ids.iter().copied().collect();
    assert_eq!(contact.contact_marker_ids, want);
}

#[test]
fn sliding_contact_reads_as_translation() {
    let object = rod();
    let cfg = PipelineConfig::default();
    let trials = 1000;
    let mut hits = 0;
    for seed in 0..trials {
        let p = SimParams {
            seed,
            marker_noise_px: 0.2,
            slide_px_per_frame: (1.5, 0.5),
            ..SimParams::default()
        };
        let g = simulate_grasp(&object, &p, object.cog_offset, 36).unwrap();
        let ids: BTreeSet<u32> = g.contact_ids.iter().copied().collect();
        let v = MotionVectorSet::from_frames(&g.frames[0], &g.frames[20], &g.frames[35], &ids);
        if classify_frame(&v, &cfg, false) == MotionClass::Translation {
            hits += 1;
        }
    }
    assert!(hits as f64 >= 0.95 * trials as f64, "{hits} of {trials}");
}

#[test]
fn pipeline_plant_agrees_with_the_oracle() {
    let cfg = PipelineConfig::default();
    let menu = object_menu();
    let mut agree = 0;
    let mut total = 0;
    for (i, base) in menu.iter().take(10).enumerate() {
        let object = base.with_cog(0.1 * base.length * if i % 2 == 0 { 1.0 } else { -1.0 });
        for k in 0..20 {
            let offset = object.length * (-0.45 + 0.9 * k as f64 / 19.0);
            let p = SimParams {
                seed: (i * 100 + k) as u64,
                ..SimParams::default()
            };
            let g = simulate_grasp(&object, &p, offset, 90).unwrap();
            let measured = run_sequence(&g.frames, &g.renderer, &cfg).unwrap().verdict.stability;
            let oracle = oracle_outcome(&object, &p, offset, &cfg).verdict.stability;
            total += 1;
            if measured == oracle {
                agree += 1;
            }
        }
    }
    assert_eq!(total, 200);
    assert!(agree as f64 >= 0.95 * total as f64, "{agree} of {total}");
}
