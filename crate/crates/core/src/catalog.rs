//! Star catalog: CSV ingestion, field-of-view queries and the interstar-angle
//! triangle index used for lost-in-space plate solving.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::geometry::{angular_separation, SkyCoord, UnitQuaternion, Vec3};
use crate::simulator::CameraModel;

pub const CATALOG_CSV_HEADER: [&str; 4] = ["id", "ra_deg", "dec_deg", "mag"];

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("duplicate star id {id} (line {line})")]
    Duplicate { id: u32, line: usize },
    #[error("triangle index needs at least 3 stars, catalog has {0}")]
    InsufficientStars(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Star {
    pub id: u32,
    /// ICRF unit direction.
    pub dir: Vec3,
    pub mag: f64,
}

impl Star {
    pub fn from_radec(id: u32, ra_deg: f64, dec_deg: f64, mag: f64) -> Result<Self, CatalogError> {
        let c = SkyCoord::new(ra_deg, dec_deg)
            .map_err(|e| CatalogError::InvalidArgument(e.to_string()))?;
        Ok(Self {
            id,
            dir: c.to_unit(),
            mag,
        })
    }
}

/// A star in view, with its pixel position.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VisibleStar {
    /// Position of the star in [`Catalog::stars`].
    pub index: usize,
    pub star: Star,
    pub u: f64,
    pub v: f64,
}

const GRID_STEP_DEG: f64 = 1.0;
const DEC_BANDS: usize = 180;
const RA_BINS: usize = 360;

/// Fixed RA/Dec bucket grid at one-degree resolution.
#[derive(Clone, Debug)]
struct SkyGrid {
    cells: Vec<Vec<u32>>,
}

impl SkyGrid {
    fn cell_of(dir: &Vec3) -> (usize, usize) {
        let c = SkyCoord::from_unit(dir);
        let band = (((c.dec_deg + 90.0) / GRID_STEP_DEG) as usize).min(DEC_BANDS - 1);
        let bin = ((c.ra_deg / GRID_STEP_DEG) as usize).min(RA_BINS - 1);
        (band, bin)
    }

    fn build(stars: &[Star]) -> Self {
        let mut cells = vec![Vec::new(); DEC_BANDS * RA_BINS];
        for (i, s) in stars.iter().enumerate() {
            let (band, bin) = Self::cell_of(&s.dir);
            cells[band * RA_BINS + bin].push(i as u32);
        }
        Self { cells }
    }

    /// Indices of stars in cells that may lie within `radius` of `center`.
    fn candidates(&self, center: &Vec3, radius_rad: f64, out: &mut Vec<u32>) {
        let c = SkyCoord::from_unit(center);
        let r_deg = radius_rad.to_degrees();
        let dec_lo = (c.dec_deg - r_deg).max(-90.0);
        let dec_hi = (c.dec_deg + r_deg).min(90.0);
        let band_lo = (((dec_lo + 90.0) / GRID_STEP_DEG) as usize).min(DEC_BANDS - 1);
        let band_hi = (((dec_hi + 90.0) / GRID_STEP_DEG) as usize).min(DEC_BANDS - 1);
        let max_abs_dec = dec_lo.abs().max(dec_hi.abs());
        let ra_half = if max_abs_dec >= 89.0 || r_deg >= 60.0 {
            180.0
        } else {
            let s = radius_rad.sin() / max_abs_dec.to_radians().cos();
            if s >= 1.0 {
                180.0
            } else {
                s.asin().to_degrees() + GRID_STEP_DEG
            }
        };
        for band in band_lo..=band_hi {
            let row = &self.cells[band * RA_BINS..(band + 1) * RA_BINS];
            if ra_half >= 180.0 {
                row.iter().for_each(|cell| out.extend_from_slice(cell));
                continue;
            }
            let lo = ((c.ra_deg - ra_half) / GRID_STEP_DEG).floor() as i64;
            let hi = ((c.ra_deg + ra_half) / GRID_STEP_DEG).floor() as i64;
            for b in lo..=hi {
                out.extend_from_slice(&row[b.rem_euclid(RA_BINS as i64) as usize]);
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct Catalog {
    stars: Vec<Star>,
    mag_limit: f64,
    grid: SkyGrid,
}

impl Catalog {
    /// Builds a catalog, dropping stars fainter than `mag_limit`.
    pub fn new(mut stars: Vec<Star>, mag_limit: f64) -> Result<Self, CatalogError> {
        stars.sort_by_key(|s| s.id);
        if let Some(w) = stars.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(CatalogError::Duplicate { id: w[0].id, line: 0 });
        }
        stars.retain(|s| s.mag <= mag_limit);
        for s in &mut stars {
            s.dir = s.dir.normalize();
        }
        let grid = SkyGrid::build(&stars);
        Ok(Self {
            stars,
            mag_limit,
            grid,
        })
    }

    pub fn stars(&self) -> &[Star] {
        &self.stars
    }

    pub fn len(&self) -> usize {
        self.stars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stars.is_empty()
    }

    pub fn mag_limit(&self) -> f64 {
        self.mag_limit
    }

    pub fn index_of(&self, id: u32) -> Option<usize> {
        self.stars.binary_search_by_key(&id, |s| s.id).ok()
    }

    /// Indices of stars within `radius_rad` of `center`, ascending.
    pub fn cone(&self, center: &Vec3, radius_rad: f64) -> Vec<usize> {
        let mut cand = Vec::new();
        self.grid.candidates(center, radius_rad, &mut cand);
        let cos_r = radius_rad.cos();
        let mut out: Vec<usize> = cand
            .into_iter()
            .map(|i| i as usize)
            .filter(|&i| {
                let d = self.stars[i].dir.dot(center);
                d >= cos_r && angular_separation(&self.stars[i].dir, center) <= radius_rad
            })
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Stars projecting inside the sensor, brightest first.
    pub fn stars_in_fov(&self, attitude: &UnitQuaternion, cam: &CameraModel) -> Vec<VisibleStar> {
        let boresight = attitude.rotate(&Vec3::z());
        let mut out: Vec<VisibleStar> = self
            .cone(&boresight, cam.half_diagonal_fov() * 1.05 + 1e-6)
            .into_iter()
            .filter_map(|index| {
                let star = self.stars[index];
                let (u, v) = cam.project(attitude, &star.dir)?;
                cam.contains(u, v).then_some(VisibleStar { index, star, u, v })
            })
            .collect();
        out.sort_by(|a, b| a.star.mag.total_cmp(&b.star.mag).then(a.star.id.cmp(&b.star.id)));
        out
    }
}

fn open(path: &Path) -> Result<std::fs::File, CatalogError> {
    std::fs::File::open(path).map_err(|source| CatalogError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Reads a catalog CSV (`id,ra_deg,dec_deg,mag`).
pub fn read_catalog<R: Read>(reader: R, mag_limit: f64) -> Result<Catalog, CatalogError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| CatalogError::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    if header.iter().collect::<Vec<_>>() != CATALOG_CSV_HEADER {
        return Err(CatalogError::Parse {
            line: 1,
            message: format!("expected header {}", CATALOG_CSV_HEADER.join(",")),
        });
    }
    let mut seen: HashMap<u32, usize> = HashMap::new();
    let mut stars = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| CatalogError::Parse {
            line,
            message: e.to_string(),
        })?;
        if row.len() != 4 {
            return Err(CatalogError::Parse {
                line,
                message: format!("expected 4 fields, found {}", row.len()),
            });
        }
        let field = |k: usize| -> Result<f64, CatalogError> {
            row[k]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| CatalogError::Parse {
                    line,
                    message: format!("{} is not a number: {:?}", CATALOG_CSV_HEADER[k], &row[k]),
                })
        };
        let id: u32 = row[0].parse().map_err(|_| CatalogError::Parse {
            line,
            message: format!("id is not an unsigned integer: {:?}", &row[0]),
        })?;
        let (ra, dec, mag) = (field(1)?, field(2)?, field(3)?);
        if !(0.0..360.0).contains(&ra) || !(-90.0..=90.0).contains(&dec) {
            return Err(CatalogError::Parse {
                line,
                message: format!("coordinates out of range: ra {ra}, dec {dec}"),
            });
        }
        if seen.insert(id, line).is_some() {
            return Err(CatalogError::Duplicate { id, line });
        }
        stars.push(Star::from_radec(id, ra, dec, mag)?);
    }
    Catalog::new(stars, mag_limit)
}

pub fn load_catalog(path: &Path, mag_limit: f64) -> Result<Catalog, CatalogError> {
    read_catalog(open(path)?, mag_limit)
}

pub fn write_catalog<W: Write>(stars: &[Star], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{}", CATALOG_CSV_HEADER.join(","))?;
    for s in stars {
        let c = SkyCoord::from_unit(&s.dir);
        writeln!(out, "{},{:.9},{:.9},{:.3}", s.id, c.ra_deg, c.dec_deg, s.mag)?;
    }
    Ok(())
}

/// Parameters of a synthetic star field filling an RA/Dec box.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldSpec {
    pub ra_min_deg: f64,
    pub ra_max_deg: f64,
    pub dec_min_deg: f64,
    pub dec_max_deg: f64,
    /// Mean stars per square degree.
    pub density_per_deg2: f64,
    pub mag_min: f64,
    pub mag_max: f64,
    /// Log-slope of the magnitude distribution, `dN/dm ∝ 10^(slope·m)`.
    pub mag_slope: f64,
    pub first_id: u32,
}

impl FieldSpec {
    pub fn area_deg2(&self) -> f64 {
        let ra = (self.ra_max_deg - self.ra_min_deg).to_radians();
        let band = self.dec_max_deg.to_radians().sin() - self.dec_min_deg.to_radians().sin();
        ra * band * (180.0 / std::f64::consts::PI).powi(2)
    }
}

/// Uniformly distributed stars with a power-law magnitude distribution,
/// for scenes denser than bright-star catalogs provide.
pub fn synthetic_field(spec: &FieldSpec, seed: u64) -> Vec<Star> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = (spec.area_deg2() * spec.density_per_deg2).round() as usize;
    let (s_lo, s_hi) = (
        spec.dec_min_deg.to_radians().sin(),
        spec.dec_max_deg.to_radians().sin(),
    );
    let k = spec.mag_slope * std::f64::consts::LN_10;
    let (e_lo, e_hi) = ((k * spec.mag_min).exp(), (k * spec.mag_max).exp());
    (0..count)
        .map(|i| {
            let ra = rng.random_range(spec.ra_min_deg..spec.ra_max_deg);
            let dec = rng.random_range(s_lo..s_hi).asin().to_degrees();
            let u: f64 = rng.random();
            let mag = (e_lo + u * (e_hi - e_lo)).ln() / k;
            let c = SkyCoord::new(ra, dec).expect("box inside the sphere");
            Star {
                id: spec.first_id + i as u32,
                dir: c.to_unit(),
                mag: (mag * 1000.0).round() / 1000.0,
            }
        })
        .collect()
}

/// One indexed star triple. `stars[k]` is the catalog index of the vertex
/// opposite side `sides[k]`; sides are descending.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TriangleEntry {
    pub stars: [u32; 3],
    pub sides: [f64; 3],
}

/// Orders the vertices of a triangle by descending opposite side.
/// `dirs` are the three vertex directions; returns (vertex order, sides).
pub fn canonical_triangle(dirs: [&Vec3; 3]) -> ([usize; 3], [f64; 3]) {
    let opposite = [
        angular_separation(dirs[1], dirs[2]),
        angular_separation(dirs[0], dirs[2]),
        angular_separation(dirs[0], dirs[1]),
    ];
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| opposite[b].total_cmp(&opposite[a]).then(a.cmp(&b)));
    (order, [opposite[order[0]], opposite[order[1]], opposite[order[2]]])
}

/// Star triples keyed by their two largest quantized interstar angles.
#[derive(Clone, Debug)]
pub struct TriangleIndex {
    quantization_rad: f64,
    max_separation_rad: f64,
    entries: Vec<TriangleEntry>,
    buckets: HashMap<(u32, u32), Vec<u32>>,
}

impl TriangleIndex {
    /// Indexes every star triple whose pairwise separations are all at most
    /// `max_separation_deg`.
    pub fn build(cat: &Catalog, max_separation_deg: f64, quantization_arcsec: f64) -> Result<Self, CatalogError> {
        Self::build_with_mag_limit(cat, max_separation_deg, quantization_arcsec, f64::INFINITY)
    }

    /// Like [`TriangleIndex::build`] but only stars no fainter than
    /// `mag_limit` form triangles. Entries still index the full catalog, so
    /// fainter stars remain available for verification.
    pub fn build_with_mag_limit(
        cat: &Catalog,
        max_separation_deg: f64,
        quantization_arcsec: f64,
        mag_limit: f64,
    ) -> Result<Self, CatalogError> {
        let bright = cat.stars().iter().filter(|s| s.mag <= mag_limit).count();
        if bright < 3 {
            return Err(CatalogError::InsufficientStars(bright));
        }
        if !(max_separation_deg > 0.0 && max_separation_deg < 90.0) || !(quantization_arcsec > 0.0) {
            return Err(CatalogError::InvalidArgument(format!(
                "max separation {max_separation_deg} deg and quantization {quantization_arcsec} arcsec must be positive"
            )));
        }
        let max_sep = max_separation_deg.to_radians();
        let quant = crate::geometry::arcsec_to_rad(quantization_arcsec);
        let stars = cat.stars();
        let cos_max = max_sep.cos();

        let neighbors: Vec<Vec<usize>> = stars
            .iter()
            .enumerate()
            .map(|(i, s)| {
                if s.mag > mag_limit {
                    return Vec::new();
                }
                cat.cone(&s.dir, max_sep)
                    .into_iter()
                    .filter(|&j| j > i && stars[j].mag <= mag_limit)
                    .collect()
            })
            .collect();

        let mut index = Self {
            quantization_rad: quant,
            max_separation_rad: max_sep,
            entries: Vec::new(),
            buckets: HashMap::new(),
        };
        for (i, near) in neighbors.iter().enumerate() {
            for (a, &j) in near.iter().enumerate() {
                for &k in &near[a + 1..] {
                    if stars[j].dir.dot(&stars[k].dir) < cos_max
                        || angular_separation(&stars[j].dir, &stars[k].dir) > max_sep
                    {
                        continue;
                    }
                    let verts = [i, j, k];
                    let (order, sides) =
                        canonical_triangle([&stars[i].dir, &stars[j].dir, &stars[k].dir]);
                    let entry = TriangleEntry {
                        stars: [
                            verts[order[0]] as u32,
                            verts[order[1]] as u32,
                            verts[order[2]] as u32,
                        ],
                        sides,
                    };
                    let key = index.key(&sides);
                    index
                        .buckets
                        .entry(key)
                        .or_default()
                        .push(index.entries.len() as u32);
                    index.entries.push(entry);
                }
            }
        }
        Ok(index)
    }

    fn key(&self, sides: &[f64; 3]) -> (u32, u32) {
        (
            (sides[0] / self.quantization_rad) as u32,
            (sides[1] / self.quantization_rad) as u32,
        )
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[TriangleEntry] {
        &self.entries
    }

    pub fn quantization_rad(&self) -> f64 {
        self.quantization_rad
    }

    pub fn max_separation_rad(&self) -> f64 {
        self.max_separation_rad
    }

    /// Entries stored under the key of `sides` and its eight neighbours.
    pub fn lookup(&self, sides: &[f64; 3]) -> Vec<&TriangleEntry> {
        let (k0, k1) = self.key(sides);
        let mut out = Vec::new();
        for d0 in -1i64..=1 {
            for d1 in -1i64..=1 {
                let (a, b) = (k0 as i64 + d0, k1 as i64 + d1);
                if a < 0 || b < 0 {
                    continue;
                }
                if let Some(ids) = self.buckets.get(&(a as u32, b as u32)) {
                    out.extend(ids.iter().map(|&e| &self.entries[e as usize]));
                }
            }
        }
        out
    }
}
