//! Subprocess interface to the external component renderer.
//!
//! The renderer is invoked as
//! `<program> [args..] --source <path> --viewport <W>x<H> --seed <n> --out <dir>`
//! and writes `screenshot.png` plus `tree.json` (see `schema/element_tree.schema.json`)
//! into `<dir>`. Its exit codes follow the CLI convention.

use std::path::{Path, PathBuf};
use std::process::Command;

use serde::{Deserialize, Serialize};

use crate::element::{parse_element_tree, ElementTree};
use crate::error::{Error, Result};
use crate::geometry::ImageDims;
use crate::provider::ProviderError;

pub const SCREENSHOT_FILE: &str = "screenshot.png";
pub const TREE_FILE: &str = "tree.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderJob {
    pub source: PathBuf,
    pub viewport: ImageDims,
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl RenderJob {
    pub fn validate(&self) -> Result<()> {
        if self.viewport.width < 64 || self.viewport.height < 64 {
            return Err(Error::invalid(format!(
                "viewport {}x{} is smaller than 64x64",
                self.viewport.width, self.viewport.height
            )));
        }
        Ok(())
    }

    pub fn args(&self) -> Vec<String> {
        vec![
            "--source".into(),
            self.source.display().to_string(),
            "--viewport".into(),
            format!("{}x{}", self.viewport.width, self.viewport.height),
            "--seed".into(),
            self.seed.to_string(),
            "--out".into(),
            self.out_dir.display().to_string(),
        ]
    }
}

#[derive(Debug, Clone)]
pub struct CaptureResult {
    pub screenshot: PathBuf,
    pub tree_path: PathBuf,
    pub tree: ElementTree,
}

/// Run the renderer and parse what it wrote.
pub fn render_component(program: &[String], job: &RenderJob) -> Result<CaptureResult> {
    job.validate()?;
    let (exe, pre) = program
        .split_first()
        .ok_or_else(|| Error::invalid("renderer command is empty"))?;
    std::fs::create_dir_all(&job.out_dir).map_err(|e| Error::io(&job.out_dir, e))?;
    let status = Command::new(exe)
        .args(pre)
        .args(job.args())
        .status()
        .map_err(|e| Error::io(exe, e))?;
    match status.code() {
        Some(0) => {}
        Some(1) => {
            return Err(Error::invalid(format!(
                "renderer rejected {}",
                job.source.display()
            )))
        }
        Some(2) => {
            return Err(ProviderError::Transport(format!(
                "renderer failed on {}",
                job.source.display()
            ))
            .into())
        }
        _ => {
            return Err(Error::io(
                &job.out_dir,
                std::io::Error::other(format!("renderer exited with {status}")),
            ))
        }
    }
    read_capture(&job.out_dir, job.viewport)
}

/// Parse a capture directory and check it against the requested viewport.
pub fn read_capture(dir: &Path, viewport: ImageDims) -> Result<CaptureResult> {
    let tree_path = dir.join(TREE_FILE);
    let raw = std::fs::read(&tree_path).map_err(|e| Error::io(&tree_path, e))?;
    let tree = parse_element_tree(&raw)?;
    if (tree.image.width, tree.image.height) != (viewport.width, viewport.height) {
        return Err(Error::invalid(format!(
            "capture is {}x{}, expected {}x{}",
            tree.image.width, tree.image.height, viewport.width, viewport.height
        )));
    }
    if tree.nodes.is_empty() {
        return Err(Error::Tree("renderer produced an empty tree".into()));
    }
    Ok(CaptureResult {
        screenshot: dir.join(SCREENSHOT_FILE),
        tree_path,
        tree,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn job(dir: &Path) -> RenderJob {
        RenderJob {
            source: "button.tsx".into(),
            viewport: ImageDims::new(1280, 720),
            seed: 1,
            out_dir: dir.to_path_buf(),
        }
    }

    // Stand-in renderer: writes a one-node tree into the directory after `--out`.
    const FAKE: &str = r#"while [ "$1" != "--out" ]; do shift; done
printf '{"image":{"width":1280,"height":720,"screenshot":"screenshot.png"},"nodes":[{"id":"b","bbox":[10,10,80,30],"interactive":true,"tag":"button"}]}' > "$2/tree.json""#;

    #[test]
    fn runs_renderer_and_parses_tree() {
        let dir = tempfile::tempdir().unwrap();
        let cmd = vec![
            "sh".to_string(),
            "-c".into(),
            FAKE.into(),
            "renderer".into(),
        ];
        let cap = render_component(&cmd, &job(dir.path())).unwrap();
        assert_eq!(cap.tree.nodes.len(), 1);
        assert!(cap.tree.nodes[0].interactive);
    }

    #[test]
    fn exit_codes_map_to_error_kinds() {
        let dir = tempfile::tempdir().unwrap();
        let run = |code: &str| {
            let cmd = vec!["sh".to_string(), "-c".into(), format!("exit {code}")];
            render_component(&cmd, &job(dir.path())).unwrap_err().kind()
        };
        assert_eq!(run("1"), crate::ErrorKind::Validation);
        assert_eq!(run("2"), crate::ErrorKind::Provider);
        assert_eq!(run("3"), crate::ErrorKind::Io);
    }

    #[test]
    fn small_viewport_rejected() {
        let mut j = job(Path::new("."));
        j.viewport = ImageDims::new(32, 720);
        assert!(j.validate().is_err());
    }
}
