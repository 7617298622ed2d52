//! Shared fixtures for the hot-path benchmarks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wildskill_core::camera::{render_frame, CameraConfig, Clip, CLIP_LEN};
use wildskill_core::classifier::{Architecture, Classifier, ClassifierConfig};
use wildskill_core::harness::{Controller, ScriptedController};
use wildskill_core::policy::{Policy, PolicyConfig};
use wildskill_core::sim::{self, observe, RobotConfig, RobotState, OBS_LEN};
use wildskill_core::Skill;

pub struct Fixture {
    pub robot: RobotConfig,
    pub cam: CameraConfig,
    /// Mid-stride walking state.
    pub state: RobotState,
    pub clip: Clip,
    pub classifier: Classifier,
    pub policy: Policy,
    pub obs: [f32; OBS_LEN],
}

impl Fixture {
    pub fn new(seed: u64) -> Fixture {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let robot = RobotConfig::default();
        let cam = CameraConfig::default();
        let oracle = ScriptedController::new(&robot);
        let mut state = sim::reset(&robot, &mut rng);
        let mut frames = Vec::with_capacity(CLIP_LEN);
        for k in 1..=100 + 5 * CLIP_LEN {
            let a = oracle.act(&state, Skill::Walk).expect("oracle acts");
            sim::step(&mut state, &a, &robot).expect("oracle stays finite");
            if k > 100 && k % 5 == 0 {
                frames.push(render_frame(&state, &robot, &cam));
            }
        }
        let clip = Clip::new(frames).expect("eight frames");
        let arch = Architecture::of(&ClassifierConfig::default());
        let classifier = Classifier::init(arch, &mut rng).expect("classifier");
        let policy = Policy::init(&PolicyConfig::default(), &robot, &mut rng).expect("policy");
        let obs = observe(&state, Skill::Walk);
        Fixture {
            robot,
            cam,
            state,
            clip,
            classifier,
            policy,
            obs,
        }
    }
}
