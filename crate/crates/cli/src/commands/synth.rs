use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use laserprof_core::synth::{render_with_truth, staircase_base, GroundTruth, STAIRCASE_STEPS_MM};
use laserprof_core::{make_staircase_scenes, material_table, SceneSpec};
use serde::{Deserialize, Serialize};

use crate::args::{Preset, SynthArgs};
use crate::bench::{table2_scene, GAUGE_MM};
use crate::config::{self, SynthConfig};
use crate::io;
use crate::Status;

/// Sidecar written next to every rendered frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub label: String,
    pub frame: String,
    pub ground_truth: GroundTruth,
}

/// Labelled scenes of a preset.
pub fn preset_scenes(preset: Preset) -> anyhow::Result<Vec<(String, SceneSpec)>> {
    Ok(match preset {
        Preset::Track => vec![(
            "track".into(),
            SceneSpec::default().with_track(320.0, 300.0, 150.0),
        )],
        Preset::Staircase => make_staircase_scenes(&STAIRCASE_STEPS_MM, &staircase_base())?
            .into_iter()
            .enumerate()
            .map(|(i, s)| (format!("step{}", i + 1), s))
            .collect(),
        Preset::Gauge => vec![(
            "gauge".into(),
            make_staircase_scenes(&[GAUGE_MM], &staircase_base())?.remove(0),
        )],
        Preset::Table2 => material_table()
            .iter()
            .enumerate()
            .map(|(i, m)| {
                let label: String = m
                    .name
                    .chars()
                    .filter(|c| c.is_alphanumeric())
                    .flat_map(char::to_lowercase)
                    .collect();
                (label, table2_scene(m.diffusion_mean_abs_um, 0, i, 0))
            })
            .collect(),
    })
}

/// Renders `frames` frames of every scene into `out`. Seeds count up from
/// `seed` (or each scene's own seed) across all frames written.
pub fn render_all(
    scenes: &[(String, SceneSpec)],
    frames: usize,
    seed: Option<u64>,
    out: &Path,
) -> anyhow::Result<Vec<PathBuf>> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut written = Vec::new();
    let mut k = 0u64;
    for (label, scene) in scenes {
        for i in 0..frames {
            let base = seed.unwrap_or(scene.rng_seed);
            let spec = scene
                .clone()
                .with_seed(base.wrapping_add(if seed.is_some() { k } else { i as u64 }));
            let (frame, truth) = render_with_truth(&spec)?;
            let name = format!("{label}-{i:04}");
            let pgm = out.join(format!("{name}.pgm"));
            io::write_pgm16(&pgm, &frame)?;
            let sidecar = Sidecar {
                label: label.clone(),
                frame: format!("{name}.pgm"),
                ground_truth: truth,
            };
            io::write_json(
                io::open_output(Some(&out.join(format!("{name}.json"))))?,
                &sidecar,
            )?;
            written.push(pgm);
            k += 1;
        }
    }
    Ok(written)
}

pub fn run(args: &SynthArgs) -> anyhow::Result<Status> {
    let cfg: SynthConfig = config::load(args.config.as_deref())?;
    let scenes = match (&args.scene, args.preset) {
        (Some(path), _) => {
            let scene: SceneSpec = config::read_json(path, "scene")?;
            scene.validate()?;
            vec![("scene".to_string(), scene)]
        }
        (None, Some(preset)) => preset_scenes(preset)?,
        (None, None) => unreachable!("clap requires --scene or --preset"),
    };
    let frames = args.frames.or(cfg.frames).unwrap_or(1);
    render_all(&scenes, frames, args.seed.or(cfg.seed), &args.out)?;
    Ok(Status::Ok)
}
