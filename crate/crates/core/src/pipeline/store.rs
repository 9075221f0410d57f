use super::tmap::{encode_translation_map, CanonicalFlatMesh, TranslationMap};
use crate::formats;
use crate::sim::{ClothMesh, DepthCamera, RawDataset};
use crate::{Error, Result};
use std::io::{Read, Write};
use std::path::Path;

pub const DATASET_VERSION: &str = "1";

/// Dataset directory metadata.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Manifest {
    pub version: String,
    pub grid_h: usize,
    pub grid_w: usize,
    pub cloth_w: f64,
    pub cloth_l: f64,
    pub camera: DepthCamera,
    pub count: usize,
    pub seed: u64,
}

/// One sample in storage form: depth in 0.1 mm units, mask, ground-truth
/// vertices as 32-bit floats, and the quantized translation map.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredSample {
    pub depth_tenth_mm: Vec<u16>,
    pub mask: Vec<bool>,
    pub mesh: Vec<f32>,
    pub tmap: TranslationMap,
}

impl StoredSample {
    pub fn depth_meters(&self) -> Vec<f64> {
        self.depth_tenth_mm.iter().map(|&d| d as f64 * 1e-4).collect()
    }

    pub fn mesh_f64(&self, grid_h: usize, grid_w: usize) -> Result<ClothMesh> {
        let vertices = self
            .mesh
            .chunks_exact(3)
            .map(|v| [v[0] as f64, v[1] as f64, v[2] as f64])
            .collect();
        ClothMesh::new(grid_h, grid_w, vertices)
    }
}

/// A processed dataset: everything the trainer and evaluator need, in the
/// exact numeric forms that persist to disk (round trips are bit-exact).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub manifest: Manifest,
    pub samples: Vec<StoredSample>,
}

impl Dataset {
    /// Quantize a raw simulation run into storage form.
    pub fn from_raw(raw: &RawDataset) -> Result<Self> {
        let manifest = Manifest {
            version: DATASET_VERSION.into(),
            grid_h: raw.spec.grid_h,
            grid_w: raw.spec.grid_w,
            cloth_w: raw.spec.side,
            cloth_l: raw.spec.side,
            camera: raw.spec.camera,
            count: raw.samples.len(),
            seed: raw.spec.seed,
        };
        let canonical = canonical_of(&manifest)?;
        let samples = raw
            .samples
            .iter()
            .map(|s| {
                let depth_tenth_mm = s
                    .depth
                    .depth
                    .iter()
                    .map(|&d| (d * 1e4).round().clamp(0.0, u16::MAX as f64) as u16)
                    .collect();
                let mesh =
                    s.mesh.vertices().iter().flat_map(|v| v.map(|c| c as f32)).collect();
                Ok(StoredSample {
                    depth_tenth_mm,
                    mask: s.depth.mask.clone(),
                    mesh,
                    tmap: encode_translation_map(&s.mesh, &canonical)?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self { manifest, samples })
    }

    pub fn canonical(&self) -> Result<CanonicalFlatMesh> {
        canonical_of(&self.manifest)
    }
}

fn canonical_of(m: &Manifest) -> Result<CanonicalFlatMesh> {
    CanonicalFlatMesh::new(m.grid_h, m.grid_w, m.cloth_w, m.cloth_l)
}

fn write_f32(path: &Path, data: &[f32]) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    for v in data {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_f32(path: &Path, expected: usize) -> Result<Vec<f32>> {
    let mut buf = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut buf)?;
    if buf.len() != expected * 4 {
        return Err(Error::Malformed {
            path: path.display().to_string(),
            detail: format!("expected {} floats, file holds {} bytes", expected, buf.len()),
        });
    }
    Ok(buf.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect())
}

/// Layout: `manifest.json`, `canonical.f32`, and per sample i
/// `depth_i.pgm` (16-bit), `mask_i.pgm` (8-bit 0/255), `mesh_i.f32`,
/// `tmap_i.ppm` (RGB = quantized map).
pub fn write_dataset(ds: &Dataset, dir: &Path) -> Result<()> {
    if ds.samples.len() != ds.manifest.count {
        return Err(Error::Dataset(format!(
            "manifest count {} != {} samples",
            ds.manifest.count,
            ds.samples.len()
        )));
    }
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&ds.manifest)?)?;
    let canonical = ds.canonical()?;
    let can_f32: Vec<f32> =
        canonical.mesh().vertices().iter().flat_map(|v| v.map(|c| c as f32)).collect();
    write_f32(&dir.join("canonical.f32"), &can_f32)?;
    let (rows, cols) = (ds.manifest.camera.rows, ds.manifest.camera.cols);
    let (gh, gw) = (ds.manifest.grid_h, ds.manifest.grid_w);
    for (i, s) in ds.samples.iter().enumerate() {
        formats::write_pgm16(&dir.join(format!("depth_{i}.pgm")), rows, cols, &s.depth_tenth_mm)?;
        let mask: Vec<u8> = s.mask.iter().map(|&m| if m { 255 } else { 0 }).collect();
        formats::write_pgm8(&dir.join(format!("mask_{i}.pgm")), rows, cols, &mask)?;
        write_f32(&dir.join(format!("mesh_{i}.f32")), &s.mesh)?;
        formats::write_ppm8(&dir.join(format!("tmap_{i}.ppm")), gh, gw, s.tmap.quantized())?;
    }
    Ok(())
}

pub fn read_dataset(dir: &Path) -> Result<Dataset> {
    let manifest_path = dir.join("manifest.json");
    let manifest: Manifest = serde_json::from_str(&std::fs::read_to_string(&manifest_path)?)?;
    if manifest.version != DATASET_VERSION {
        return Err(Error::UnsupportedVersion(manifest.version));
    }
    // fail up front if the directory disagrees with the manifest count
    for i in 0..manifest.count {
        for name in ["depth_{i}.pgm", "mask_{i}.pgm", "mesh_{i}.f32", "tmap_{i}.ppm"] {
            let name = name.replace("{i}", &i.to_string());
            if !dir.join(&name).exists() {
                return Err(Error::Dataset(format!(
                    "manifest lists {} samples but {name} is missing",
                    manifest.count
                )));
            }
        }
    }
    let canonical = canonical_of(&manifest)?;
    let expected_canonical: Vec<f32> =
        canonical.mesh().vertices().iter().flat_map(|v| v.map(|c| c as f32)).collect();
    let stored_canonical =
        read_f32(&dir.join("canonical.f32"), manifest.grid_h * manifest.grid_w * 3)?;
    if stored_canonical != expected_canonical {
        return Err(Error::Malformed {
            path: dir.join("canonical.f32").display().to_string(),
            detail: "canonical mesh disagrees with manifest dimensions".into(),
        });
    }
    let (rows, cols) = (manifest.camera.rows, manifest.camera.cols);
    let (gh, gw) = (manifest.grid_h, manifest.grid_w);
    let mut samples = Vec::with_capacity(manifest.count);
    for i in 0..manifest.count {
        let depth_path = dir.join(format!("depth_{i}.pgm"));
        let (dr, dc, depth_tenth_mm) = formats::read_pgm16(&depth_path)?;
        let (mr, mc, mask_bytes) = formats::read_pgm8(&dir.join(format!("mask_{i}.pgm")))?;
        if (dr, dc) != (rows, cols) || (mr, mc) != (rows, cols) {
            return Err(Error::Malformed {
                path: depth_path.display().to_string(),
                detail: format!("image dims {dr}x{dc}/{mr}x{mc} do not match camera {rows}x{cols}"),
            });
        }
        let mask = mask_bytes.iter().map(|&b| b != 0).collect();
        let mesh = read_f32(&dir.join(format!("mesh_{i}.f32")), gh * gw * 3)?;
        let tmap_path = dir.join(format!("tmap_{i}.ppm"));
        let (tr, tc, q) = formats::read_ppm8(&tmap_path)?;
        if (tr, tc) != (gh, gw) {
            return Err(Error::Malformed {
                path: tmap_path.display().to_string(),
                detail: format!("map dims {tr}x{tc} do not match grid {gh}x{gw}"),
            });
        }
        samples.push(StoredSample {
            depth_tenth_mm,
            mask,
            mesh,
            tmap: TranslationMap::new(gh, gw, q)?,
        });
    }
    Ok(Dataset { manifest, samples })
}
