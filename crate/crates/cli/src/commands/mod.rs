pub mod animate;
pub mod evaluate;
pub mod prepare;
pub mod sed;

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use sedtalker_core::animator::TemplateMesh;
use sedtalker_core::numeric::Tensor;

/// Creates `dir` if needed. Fails if it exists as a file.
pub fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create directory {}", dir.display()))
}

/// Files in `dir` with extension `ext`, sorted by file name.
pub fn list_files(dir: &Path, ext: &str) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).with_context(|| format!("cannot list {}", dir.display()))?;
    let mut out = Vec::new();
    for e in entries {
        let p = e?.path();
        if p.is_file() && p.extension().is_some_and(|x| x == ext) {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

pub fn file_stem(path: &Path) -> Result<String> {
    match path.file_stem().and_then(|s| s.to_str()) {
        Some(s) => Ok(s.to_string()),
        None => bail!("{} has no UTF-8 file stem", path.display()),
    }
}

#[derive(serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemplateFile {
    pub positions: Vec<[f64; 3]>,
    pub lip_indices: Vec<usize>,
    #[serde(default)]
    pub upper_indices: Vec<usize>,
}

impl TemplateFile {
    pub fn from_mesh(t: &TemplateMesh) -> Self {
        let positions = (0..t.vertex_count()).map(|i| {
            let r = t.positions.row(i);
            [r[0], r[1], r[2]]
        });
        Self { positions: positions.collect(), lip_indices: t.lip_indices.clone(), upper_indices: t.upper_indices.clone() }
    }

    pub fn into_mesh(self) -> Result<TemplateMesh> {
        let n = self.positions.len();
        let flat = self.positions.into_iter().flatten().collect();
        Ok(TemplateMesh::new(Tensor::matrix(n, 3, flat)?, self.lip_indices, self.upper_indices)?)
    }
}

pub fn read_template(path: &Path) -> Result<TemplateMesh> {
    crate::output::read_json::<TemplateFile>(path)?.into_mesh()
}
