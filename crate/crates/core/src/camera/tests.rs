use super::*;
use crate::sim::{stand, step};

fn robot() -> (RobotConfig, RobotState) {
    let cfg = RobotConfig::default();
    let s = stand(&cfg, cfg.q_default);
    (cfg, s)
}

fn lit(frame: &Frame) -> usize {
    frame.pixels.iter().filter(|&&v| (v - BACKGROUND).abs() > 1e-3).count()
}

/// Column extent of pixels that differ from the background.
fn bbox_width(frame: &Frame) -> usize {
    let mut lo = FRAME_SIZE;
    let mut hi = 0;
    for r in 0..FRAME_SIZE {
        for c in 0..FRAME_SIZE {
            if (frame.get(r, c) - BACKGROUND).abs() > 0.25 {
                lo = lo.min(c);
                hi = hi.max(c);
            }
        }
    }
    hi + 1 - lo
}

#[test]
fn default_pose_visible_band() {
    let (cfg, s) = robot();
    let f = render_frame(&s, &cfg, &CameraConfig::default());
    let n = lit(&f);
    assert!((200..=1500).contains(&n), "{n} lit pixels");
    assert!(f.pixels.iter().all(|v| (0.0..=1.0).contains(v)));
    // brightest pixel is the base
    let max = f.pixels.iter().cloned().fold(0.0f32, f32::max);
    assert!((max - BASE).abs() < 1e-6);
}

#[test]
fn every_preset_shows_some_robot() {
    let (cfg, s) = robot();
    for p in CameraPreset::ALL {
        let f = render_robot_only(&s, &cfg, &CameraConfig::preset(p));
        assert!(lit(&f) > 20, "{p}");
    }
}

#[test]
fn tracking_camera_ignores_translation() {
    let (cfg, s) = robot();
    let cam = CameraConfig::default();
    let a = render_frame(&s, &cfg, &cam);
    for k in [1.0, 3.0, -7.0, 25.0] {
        let mut moved = s.clone();
        moved.x += k * TICK_SPACING;
        let b = render_frame(&moved, &cfg, &cam);
        let diff = a.pixels.iter().zip(&b.pixels).map(|(x, y)| (x - y).abs()).fold(0.0f32, f32::max);
        assert!(diff < 1e-6, "shift {k}: {diff}");
    }
}

#[test]
fn ground_ticks_reveal_motion() {
    let (cfg, s) = robot();
    let cam = CameraConfig::default();
    let mut moved = s.clone();
    moved.x += 0.5 * TICK_SPACING;
    assert_ne!(render_frame(&s, &cfg, &cam), render_frame(&moved, &cfg, &cam));
}

#[test]
fn doubling_zoom_halves_width() {
    let (cfg, s) = robot();
    let near = CameraConfig {
        offset: 0.0,
        ..CameraConfig::default()
    };
    let far = CameraConfig {
        zoom: 2.0 * near.zoom,
        ..near
    };
    let w1 = bbox_width(&render_robot_only(&s, &cfg, &near)) as f64;
    let w2 = bbox_width(&render_robot_only(&s, &cfg, &far)) as f64;
    assert!((w2 - w1 / 2.0).abs() <= 1.0, "{w1} -> {w2}");
}

#[test]
fn rendering_is_deterministic() {
    let cfg = RobotConfig::default();
    let mut s = stand(&cfg, cfg.q_default);
    let a: [f64; 8] = std::array::from_fn(|k| cfg.q_default[k] + 0.1 * k as f64);
    for _ in 0..10 {
        step(&mut s, &a, &cfg).unwrap();
    }
    let cam = CameraConfig::preset(CameraPreset::Cam3);
    assert_eq!(render_frame(&s, &cfg, &cam), render_frame(&s, &cfg, &cam));
}

#[test]
fn left_legs_drawn_over_right() {
    let (cfg, mut s) = robot();
    // splay the right front leg backwards so both left and right shades show
    s.q[2] = -0.6;
    let f = render_robot_only(&s, &cfg, &CameraConfig::default());
    let has = |v: f32| f.pixels.iter().any(|&p| (p - v).abs() < 1e-4);
    assert!(has(LEFT_LEG) && has(RIGHT_LEG) && has(BASE));
}

#[test]
fn primitive_coverage_matches_area() {
    let view = View {
        center: [0.0, 0.0],
        half_width: 1.0,
    };
    let mut f = Frame::filled(0.0);
    // disc of radius 10 px
    draw(
        &mut f,
        &Primitive {
            shape: Shape::Ellipse {
                center: [0.0, 0.0],
                axes: [10.0 / 32.0, 10.0 / 32.0],
                angle: 0.0,
            },
            intensity: 1.0,
        },
        &view,
    );
    let area: f32 = f.pixels.iter().sum();
    assert!((area as f64 - std::f64::consts::PI * 100.0).abs() < 3.0, "{area}");
    let mut g = Frame::filled(0.0);
    draw(
        &mut g,
        &Primitive {
            shape: Shape::Rect {
                center: [0.0, 0.0],
                half: [8.0 / 32.0, 4.0 / 32.0],
                angle: 0.0,
            },
            intensity: 1.0,
        },
        &view,
    );
    let area: f32 = g.pixels.iter().sum();
    assert!((area - 128.0).abs() < 1e-3, "{area}");
}

#[test]
fn buffer_warms_up_then_slides() {
    let mut buf = ClipBuffer::new(5).unwrap();
    let frame = |i: usize| Frame::filled(i as f32 / 16.0);
    for i in 1..=7 {
        assert!(buf.push_and_assemble(frame(i), 5 * i as u64).unwrap().is_none());
    }
    let clip = buf.push_and_assemble(frame(8), 40).unwrap().unwrap();
    let first: Vec<f32> = clip.frames().iter().map(|f| f.pixels[0]).collect();
    assert_eq!(first, (1..=8).map(|i| i as f32 / 16.0).collect::<Vec<_>>());
    let clip = buf.push_and_assemble(frame(9), 45).unwrap().unwrap();
    let first: Vec<f32> = clip.frames().iter().map(|f| f.pixels[0]).collect();
    assert_eq!(first, (2..=9).map(|i| i as f32 / 16.0).collect::<Vec<_>>());
}

#[test]
fn buffer_rejects_off_schedule_push() {
    let mut buf = ClipBuffer::new(5).unwrap();
    assert!(matches!(
        buf.push_and_assemble(Frame::filled(0.0), 7),
        Err(Error::NotRenderStep { step: 7, interval: 5 })
    ));
    assert!(buf.is_empty());
    assert!(ClipBuffer::new(0).is_err());
}

#[test]
fn clip_span_scales_with_interval() {
    assert!((clip_span(5, 0.02) - 0.7).abs() < 1e-12);
    assert!((clip_span(8, 0.02) - 1.12).abs() < 1e-12);
    assert!((clip_span(10, 0.02) - 2.0 * clip_span(5, 0.02)).abs() < 1e-12);
}

#[test]
fn pgm_round_trip() {
    let (cfg, s) = robot();
    let f = render_frame(&s, &cfg, &CameraConfig::default());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join(frame_file_name("robot", 35));
    assert!(path.ends_with("robot_00000035.pgm"));
    f.save_pgm(&path).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    assert!(bytes.starts_with(b"P5\n64 64\n255\n"));
    assert_eq!(bytes.len(), 13 + FRAME_PIXELS);
    let back = Frame::load_pgm(&path).unwrap();
    assert_eq!(back.to_bytes(), f.to_bytes());
}

#[test]
fn bad_clip_and_camera_rejected() {
    assert!(Clip::new(vec![Frame::filled(0.0); 7]).is_err());
    let cam = CameraConfig {
        zoom: 0.0,
        ..CameraConfig::default()
    };
    assert!(cam.validate().is_err());
    assert_eq!("cam2".parse::<CameraPreset>().unwrap(), CameraPreset::Cam2);
    assert!("cam9".parse::<CameraPreset>().is_err());
}
