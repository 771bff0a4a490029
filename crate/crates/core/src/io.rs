//! File formats: CSV series and planes, the binary plane container, and
//! TOML estimator configs.
//!
//! The container is little-endian: the 8-byte magic `TVSPEC01`, six `u64`
//! fields `T, rows, cols, d_t, d_f, n_planes`, then `n_planes` row-major
//! blocks of `rows * cols` `f64` values.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::adaptive::{ConfigPatch, EstimatorConfig};
use crate::error::{Error, Result};
use crate::grid::{EstGrid, Plane, RawGrid, RawPlane};
use crate::sim::TimeSeries;
use crate::{Real, CONTAINER_VERSION};

fn fmt<T: Real>(v: T) -> String {
    format!("{:.16e}", v.to_f64_lossy())
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => Error::Io(e),
        other => Error::data(format!("{}: {other:?}", path.display())),
    }
}

fn parse_num(path: &Path, line: usize, s: &str) -> Result<f64> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| Error::data(format!("{}:{line}: not a number: {s:?}", path.display())))?;
    if !v.is_finite() {
        return Err(Error::data(format!("{}:{line}: non-finite value", path.display())));
    }
    Ok(v)
}

pub fn write_series_csv<T: Real>(path: &Path, series: &TimeSeries<T>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(["t", "value"]).map_err(|e| csv_err(path, e))?;
    for (t, &v) in series.values().iter().enumerate() {
        w.write_record([(t + 1).to_string(), fmt(v)]).map_err(|e| csv_err(path, e))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a series from a CSV file with a `value` column (any other
/// columns are ignored) or from a single headerless column.
pub fn read_series_csv(path: &Path) -> Result<TimeSeries<f64>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_path(path).map_err(|e| csv_err(path, e))?;
    let mut rows = rdr.records();
    let first = rows
        .next()
        .ok_or_else(|| Error::data(format!("{}: empty file", path.display())))?
        .map_err(|e| csv_err(path, e))?;
    let (col, mut values) = match first.iter().position(|h| h.eq_ignore_ascii_case("value")) {
        Some(c) => (c, Vec::new()),
        None if first.len() == 1 => (0, vec![parse_num(path, 1, &first[0])?]),
        None => return Err(Error::data(format!("{}: no `value` column", path.display()))),
    };
    for (n, rec) in rows.enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let field = rec.get(col).ok_or_else(|| Error::data(format!("{}:{}: missing value", path.display(), n + 2)))?;
        values.push(parse_num(path, n + 2, field)?);
    }
    TimeSeries::from_observed(values)
}

/// Writes a plane in long format `u,lambda,f`.
pub fn write_plane_csv<T: Real>(path: &Path, plane: &Plane<T>) -> Result<()> {
    let grid = plane.grid();
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "u,lambda,f")?;
    for a in 0..grid.n_times() {
        let u = fmt(grid.u::<f64>(a));
        for b in 0..grid.n_freqs() {
            writeln!(w, "{u},{},{}", fmt(grid.lambda::<f64>(b)), fmt(plane.get(a, b)))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a plane written by [`write_plane_csv`]. The grid (length and
/// decimation) is recovered from the coordinates, which must be complete
/// and in the written order.
pub fn read_plane_csv(path: &Path) -> Result<Plane<f64>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path).map_err(|e| csv_err(path, e))?;
    let headers = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::data(format!("{}: missing column `{name}`", path.display())))
    };
    let (cu, cl, cf) = (col("u")?, col("lambda")?, col("f")?);
    let mut pts = Vec::new();
    for (n, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let get = |c: usize| parse_num(path, n + 2, rec.get(c).unwrap_or(""));
        pts.push((get(cu)?, get(cl)?, get(cf)?));
    }
    let bad = |msg: &str| Error::data(format!("{}: {msg}", path.display()));
    let (u0, _, _) = *pts.first().ok_or_else(|| bad("no rows"))?;
    let len = (1.0 / u0).round() as usize;
    let raw = RawGrid::new(len).map_err(|_| bad("cannot infer series length"))?;
    let t = len as f64;
    let ri = |u: f64| (2.0 * u * t - 2.0).round() as i64;
    let rj = |l: f64| (l * t / std::f64::consts::PI).round() as i64;
    let nf = pts.iter().take_while(|p| p.0 == u0).count();
    let d_f = if nf > 1 { (rj(pts[1].1) - rj(pts[0].1)).max(1) as usize } else { len };
    let d_t = if pts.len() > nf { (ri(pts[nf].0) - ri(u0)).max(1) as usize } else { 2 * len };
    let grid = EstGrid::new(raw, d_t, d_f).map_err(|_| bad("inconsistent grid"))?;
    if grid.n_points() != pts.len() {
        return Err(bad("coordinates do not form a complete grid"));
    }
    for (p, &(u, l, _)) in pts.iter().enumerate() {
        let (a, b) = (p / grid.n_freqs(), p % grid.n_freqs());
        if ri(u) != grid.raw_time(a) as i64 || rj(l) != grid.raw_freq(b) as i64 {
            return Err(bad(&format!("unexpected coordinates at row {}", p + 2)));
        }
    }
    Plane::new(grid, pts.into_iter().map(|p| p.2).collect())
}

/// Header and planes of a binary container.
#[derive(Clone, Debug, PartialEq)]
pub struct Container {
    pub len: usize,
    pub rows: usize,
    pub cols: usize,
    pub d_t: usize,
    pub d_f: usize,
    pub planes: Vec<Vec<f64>>,
}

impl Container {
    pub fn from_raw<T: Real>(raw: &RawPlane<T>) -> Self {
        let g = raw.grid();
        Self {
            len: g.len(),
            rows: g.n_times(),
            cols: g.n_freqs(),
            d_t: 1,
            d_f: 1,
            planes: vec![raw.values().iter().map(|v| v.to_f64_lossy()).collect()],
        }
    }

    pub fn for_grid(grid: &EstGrid, planes: Vec<Vec<f64>>) -> Self {
        let (d_t, d_f) = grid.decimation();
        Self { len: grid.raw().len(), rows: grid.n_times(), cols: grid.n_freqs(), d_t, d_f, planes }
    }

    pub fn raw_plane<T: Real>(&self, index: usize) -> Result<RawPlane<T>> {
        let g = RawGrid::new(self.len)?;
        if self.rows != g.n_times() || self.cols != g.n_freqs() {
            return Err(Error::Format("container does not hold a raw plane".into()));
        }
        let v = self.planes.get(index).ok_or_else(|| Error::Format(format!("no plane {index}")))?;
        RawPlane::new(g, v.iter().map(|&x| T::lit(x)).collect())
    }

    pub fn grid(&self) -> Result<EstGrid> {
        let g = EstGrid::new(RawGrid::new(self.len)?, self.d_t, self.d_f)?;
        if g.n_times() != self.rows || g.n_freqs() != self.cols {
            return Err(Error::Format("container shape does not match its grid".into()));
        }
        Ok(g)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(CONTAINER_VERSION.as_bytes())?;
        for v in [self.len, self.rows, self.cols, self.d_t, self.d_f, self.planes.len()] {
            w.write_all(&(v as u64).to_le_bytes())?;
        }
        for p in &self.planes {
            if p.len() != self.rows * self.cols {
                return Err(Error::GridMismatch("container plane has the wrong size".into()));
            }
            for v in p {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(|_| Error::Format("truncated container header".into()))?;
        if magic != CONTAINER_VERSION.as_bytes() {
            return Err(Error::Format(format!("{}: not a {CONTAINER_VERSION} container", path.display())));
        }
        let mut fields = [0usize; 6];
        for f in &mut fields {
            let mut b = [0u8; 8];
            r.read_exact(&mut b).map_err(|_| Error::Format("truncated container header".into()))?;
            *f = usize::try_from(u64::from_le_bytes(b)).map_err(|_| Error::Format("header field overflows".into()))?;
        }
        let [len, rows, cols, d_t, d_f, n] = fields;
        let size = rows
            .checked_mul(cols)
            .filter(|&s| s <= 1 << 32 && n <= 1 << 16)
            .ok_or_else(|| Error::Format("implausible container dimensions".into()))?;
        let mut planes = Vec::with_capacity(n);
        let mut buf = vec![0u8; size * 8];
        for _ in 0..n {
            r.read_exact(&mut buf).map_err(|_| Error::Format("truncated container data".into()))?;
            let plane: Vec<f64> = buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
            if plane.iter().any(|v| !v.is_finite()) {
                return Err(Error::data("container holds non-finite values"));
            }
            planes.push(plane);
        }
        let c = Self { len, rows, cols, d_t, d_f, planes };
        c.grid()?;
        Ok(c)
    }
}

pub fn write_raw_bin<T: Real>(path: &Path, raw: &RawPlane<T>) -> Result<()> {
    Container::from_raw(raw).write(path)
}

pub fn read_raw_bin(path: &Path) -> Result<RawPlane<f64>> {
    Container::read(path)?.raw_plane(0)
}

/// Parses a flat TOML config over the defaults for length `len`.
pub fn parse_config(text: &str, len: usize) -> Result<EstimatorConfig> {
    let patch: ConfigPatch = toml::from_str(text).map_err(|e| Error::param(format!("config: {e}")))?;
    Ok(EstimatorConfig::for_length(len).apply(&patch))
}

pub fn read_config(path: &Path, len: usize) -> Result<EstimatorConfig> {
    parse_config(&std::fs::read_to_string(path)?, len)
}

pub fn config_to_toml(config: &EstimatorConfig) -> String {
    toml::to_string(config).expect("flat config serializes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raw::preperiodogram_modified;
    use crate::sim::{generate, ModelSpec};

    #[test]
    fn series_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let s = generate::<f64>(&ModelSpec::Tvma2, 50, 3).unwrap();
        write_series_csv(&path, &s).unwrap();
        let back = read_series_csv(&path).unwrap();
        assert_eq!(back.values(), s.values());
        assert_eq!(back.model(), ModelSpec::CustomCsv);
    }

    #[test]
    fn series_accepts_single_column_and_rejects_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        std::fs::write(&path, "1.5\n-2\n3e-1\n").unwrap();
        assert_eq!(read_series_csv(&path).unwrap().values(), &[1.5, -2.0, 0.3]);
        std::fs::write(&path, "t,value\n1,1.0\n2,abc\n").unwrap();
        assert!(read_series_csv(&path).unwrap_err().is_data_error());
        std::fs::write(&path, "t,value\n1,1.0\n2,NaN\n").unwrap();
        assert!(read_series_csv(&path).unwrap_err().is_data_error());
        std::fs::write(&path, "t,value\n1,1.0\n").unwrap();
        assert!(read_series_csv(&path).unwrap_err().is_data_error());
    }

    #[test]
    fn plane_round_trip_recovers_grid() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        for (len, d_t, d_f) in [(16, 1, 1), (33, 4, 3), (20, 40, 21)] {
            let grid = EstGrid::new(RawGrid::new(len).unwrap(), d_t, d_f).unwrap();
            let p: Plane<f64> = Plane::from_fn(grid.clone(), |u: f64, l: f64| (7.0 * u).sin() / (l + 0.3));
            write_plane_csv(&path, &p).unwrap();
            let back = read_plane_csv(&path).unwrap();
            assert_eq!(back.grid(), &grid);
            assert_eq!(back.values(), p.values());
        }
    }

    #[test]
    fn container_round_trip_and_corruption() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("raw.bin");
        let raw = preperiodogram_modified(&generate::<f64>(&ModelSpec::Tvma2, 40, 1).unwrap()).unwrap();
        write_raw_bin(&path, &raw).unwrap();
        assert_eq!(read_raw_bin(&path).unwrap(), raw);
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[0] = b'X';
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(read_raw_bin(&path), Err(Error::Format(_))));
        bytes[0] = b'T';
        bytes.truncate(bytes.len() - 3);
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(read_raw_bin(&path), Err(Error::Format(_))));
    }

    #[test]
    fn config_parsing() {
        let c = parse_config("eta = 0.1\nk_hard = 4\n", 256).unwrap();
        assert_eq!(c.eta, 0.1);
        assert_eq!(c.k_hard, 4);
        assert!(matches!(parse_config("etta = 0.1\n", 256), Err(Error::Parameter(_))));
        let full = EstimatorConfig::for_length(300);
        assert_eq!(parse_config(&config_to_toml(&full), 10).unwrap(), full);
    }
}
