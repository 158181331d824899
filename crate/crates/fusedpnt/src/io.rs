//! File formats.
//!
//! # Binary schedule
//!
//! All integers little-endian.
//!
//! | bytes | content |
//! |---|---|
//! | 8 | magic `FPNTSCH1` |
//! | 4 | `t_period_us` |
//! | 4 | assignment count `m` |
//! | 6 | field widths: sv, beam, channel, t_tx, t_flight, sweep flag |
//! | 4 | sweep time selected by the flag, µs |
//! | 4 | primary-map entry count `k` |
//! | 8k | primary map: cell id, SV id (u32 each) |
//! | 6m | per assignment: cell id (u32), signal (u8), kind (u8, 0 primary, 1 secondary) |
//! | rest | the `m` assignment words, bit-packed least-significant bit first |
//!
//! The packed words are what an SV receives over the uplink; cell ids,
//! signal indices and kinds travel out of band.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use fusedpnt_core::grid::{Cell, CellGrid, GridParams};
use fusedpnt_core::geo::LatLon;
use fusedpnt_core::orbit::SvState;
use fusedpnt_core::population::{DensityGrid, TrackSample};
use fusedpnt_core::schedule::{
    decode_assignment, encode_assignment, pack_words, unpack_words, Assignment, BitLayout, GnssSchedule, Kind,
};
use serde::Serialize;
use serde_json::Value;

use crate::error::{CliError, CliResult};

const MAGIC: &[u8; 8] = b"FPNTSCH1";

pub fn write_bytes(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> CliResult<()> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    s.push('\n');
    write_bytes(path, s.as_bytes())
}

pub fn read_schedule_json(path: &Path) -> CliResult<GnssSchedule> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

pub fn encode_schedule(schedule: &GnssSchedule, layout: &BitLayout) -> CliResult<Vec<u8>> {
    layout.validate()?;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&schedule.t_period_us.to_le_bytes());
    out.extend_from_slice(&(schedule.assignments.len() as u32).to_le_bytes());
    for w in [
        layout.sv_bits,
        layout.beam_bits,
        layout.channel_bits,
        layout.t_tx_bits,
        layout.t_flight_bits,
        layout.sweep_flag_bits,
    ] {
        out.push(w as u8);
    }
    out.extend_from_slice(&layout.sweep_us.to_le_bytes());
    out.extend_from_slice(&(schedule.primary_map.len() as u32).to_le_bytes());
    for (cell, sv) in &schedule.primary_map {
        out.extend_from_slice(&cell.to_le_bytes());
        out.extend_from_slice(&sv.to_le_bytes());
    }
    let mut words = Vec::with_capacity(schedule.assignments.len());
    for a in &schedule.assignments {
        out.extend_from_slice(&a.cell_id.to_le_bytes());
        out.push(a.signal);
        out.push(match a.kind {
            Kind::Primary => 0,
            Kind::Secondary => 1,
        });
        words.push(encode_assignment(&a.tuple(), layout)?);
    }
    out.extend_from_slice(&pack_words(&words, layout.total_bits()));
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> CliResult<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|e| *e <= self.bytes.len()).ok_or_else(|| {
            CliError::Parse(format!("truncated schedule: {what} needs {n} bytes at offset {}", self.pos))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> CliResult<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u32(&mut self, what: &str) -> CliResult<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }
}

pub fn decode_schedule(bytes: &[u8]) -> CliResult<(GnssSchedule, BitLayout)> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8, "magic")? != MAGIC {
        return Err(CliError::Parse("not a binary schedule (bad magic)".into()));
    }
    let t_period_us = r.u32("period")?;
    let m = r.u32("assignment count")? as usize;
    let mut w = [0u32; 6];
    for x in &mut w {
        *x = r.u8("field widths")? as u32;
    }
    let layout = BitLayout {
        sv_bits: w[0],
        beam_bits: w[1],
        channel_bits: w[2],
        t_tx_bits: w[3],
        t_flight_bits: w[4],
        sweep_flag_bits: w[5],
        sweep_us: r.u32("sweep time")?,
    };
    layout.validate()?;
    let k = r.u32("primary map count")? as usize;
    let mut primary_map = BTreeMap::new();
    for _ in 0..k {
        let cell = r.u32("primary map")?;
        primary_map.insert(cell, r.u32("primary map")?);
    }
    let mut side = Vec::with_capacity(m.min(bytes.len()));
    for _ in 0..m {
        let cell = r.u32("assignment header")?;
        let signal = r.u8("assignment header")?;
        let kind = match r.u8("assignment header")? {
            0 => Kind::Primary,
            1 => Kind::Secondary,
            x => return Err(CliError::Parse(format!("unknown assignment kind {x}"))),
        };
        side.push((cell, signal, kind));
    }
    let width = layout.total_bits();
    let need = (m * width as usize).div_ceil(8);
    let packed = r.take(need, "packed assignment words")?;
    if r.pos != bytes.len() {
        return Err(CliError::Parse(format!("{} trailing bytes after schedule", bytes.len() - r.pos)));
    }
    let words = unpack_words(packed, width, m)?;
    let mut assignments = Vec::with_capacity(m);
    for ((cell_id, signal, kind), word) in side.into_iter().zip(words) {
        let t = decode_assignment(word, &layout)?;
        assignments.push(Assignment {
            cell_id,
            signal,
            sv_id: t.sv_id,
            beam_id: t.beam_id,
            channel_id: t.channel_id,
            t_tx_us: t.t_tx_us,
            t_flight_us: t.t_flight_us,
            t_sweep_us: t.t_sweep_us,
            kind,
        });
    }
    Ok((
        GnssSchedule {
            t_period_us,
            assignments,
            primary_map,
        },
        layout,
    ))
}

/// Reads a schedule as binary when it starts with the binary magic, JSON otherwise.
pub fn read_schedule(path: &Path) -> CliResult<GnssSchedule> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    if bytes.starts_with(MAGIC) {
        Ok(decode_schedule(&bytes)?.0)
    } else {
        read_schedule_json(path)
    }
}

pub fn write_grid_csv(path: &Path, grid: &CellGrid) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["cell_id", "lat_deg", "lon_deg", "neighbor_ids"]).map_err(csv_err)?;
    for c in grid.cells() {
        let n: Vec<String> = c.neighbor_ids.iter().map(u32::to_string).collect();
        w.write_record([
            c.id.to_string(),
            c.center.lat_deg.to_string(),
            c.center.lon_deg.to_string(),
            n.join(";"),
        ])
        .map_err(csv_err)?;
    }
    write_bytes(path, &w.into_inner().map_err(|e| CliError::Io(e.to_string()))?)
}

pub fn read_grid_csv(path: &Path, params: GridParams) -> CliResult<CellGrid> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::io(path, e))?;
    let mut cells = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| CliError::Parse(format!("{}:{line}: {e}", path.display())))?;
        let field = |k: usize| rec.get(k).ok_or_else(|| CliError::Parse(format!("{}:{line}: missing column {k}", path.display())));
        let bad = |what: &str| CliError::Parse(format!("{}:{line}: bad {what}", path.display()));
        let id: u32 = field(0)?.trim().parse().map_err(|_| bad("cell_id"))?;
        let lat: f64 = field(1)?.trim().parse().map_err(|_| bad("lat_deg"))?;
        let lon: f64 = field(2)?.trim().parse().map_err(|_| bad("lon_deg"))?;
        let neighbor_ids = field(3)?
            .split(';')
            .filter(|s| !s.trim().is_empty())
            .map(|s| s.trim().parse().map_err(|_| bad("neighbor_ids")))
            .collect::<CliResult<Vec<u32>>>()?;
        cells.push(Cell {
            id,
            center: LatLon::new(lat, lon),
            neighbor_ids,
        });
    }
    Ok(CellGrid::from_cells(params, cells)?)
}

pub fn write_sv_states_csv(path: &Path, states: &[SvState]) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["sv_id", "t", "x", "y", "z"]).map_err(csv_err)?;
    for s in states {
        w.write_record([
            s.sv_id.to_string(),
            s.epoch_s.to_string(),
            s.position.x.to_string(),
            s.position.y.to_string(),
            s.position.z.to_string(),
        ])
        .map_err(csv_err)?;
    }
    write_bytes(path, &w.into_inner().map_err(|e| CliError::Io(e.to_string()))?)
}

pub fn write_track_samples_csv(path: &Path, samples: &[TrackSample]) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for s in samples {
        w.serialize(s).map_err(csv_err)?;
    }
    write_bytes(path, &w.into_inner().map_err(|e| CliError::Io(e.to_string()))?)
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Io(e.to_string())
}

/// Flattens nested JSON objects into `a.b.c` keys, in field order.
pub fn flatten(value: &Value) -> Vec<(String, String)> {
    fn walk(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
        match v {
            Value::Object(m) => {
                for (k, x) in m {
                    let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                    walk(&key, x, out);
                }
            }
            Value::Array(a) => {
                let items: Vec<String> = a.iter().map(|x| x.to_string()).collect();
                out.push((prefix.to_string(), items.join(";")));
            }
            Value::String(s) => out.push((prefix.to_string(), s.clone())),
            Value::Null => out.push((prefix.to_string(), String::new())),
            other => out.push((prefix.to_string(), other.to_string())),
        }
    }
    let mut out = Vec::new();
    walk("", value, &mut out);
    out
}

/// Writes rows of serializable records as one flat CSV table. Columns come
/// from the first row.
pub fn write_flat_csv<T: Serialize>(path: &Path, rows: &[T]) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Option<Vec<String>> = None;
    for row in rows {
        let v = serde_json::to_value(row).map_err(|e| CliError::Io(e.to_string()))?;
        let flat = flatten(&v);
        if header.is_none() {
            let h: Vec<String> = flat.iter().map(|(k, _)| k.clone()).collect();
            w.write_record(&h).map_err(csv_err)?;
            header = Some(h);
        }
        let h = header.as_ref().expect("header set");
        let rec: Vec<String> = h
            .iter()
            .map(|k| flat.iter().find(|(x, _)| x == k).map(|(_, v)| v.clone()).unwrap_or_default())
            .collect();
        w.write_record(&rec).map_err(csv_err)?;
    }
    write_bytes(path, &w.into_inner().map_err(|e| CliError::Io(e.to_string()))?)
}

/// ASCII grid with header lines `ncols`, `nrows`, `xllcorner`, `yllcorner`,
/// `cellsize` and `nodata_value`, then `nrows` lines of values, northern row
/// first. The corner lines are optional (default -180, -90); `cellsize_deg`
/// and `nodata` are accepted as aliases, keys are case-insensitive.
pub fn parse_ascii_grid(text: &str) -> CliResult<DensityGrid> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()).peekable();
    let (mut ncols, mut nrows, mut cellsize) = (None, None, None);
    let (mut xll, mut yll, mut nodata) = (-180.0, -90.0, None);
    while let Some((i, line)) = lines.peek().copied() {
        let mut it = line.split_whitespace();
        let key = it.next().unwrap_or("").to_ascii_lowercase();
        if key.parse::<f64>().is_ok() {
            break;
        }
        let val = it.next().ok_or_else(|| CliError::Parse(format!("line {}: header `{key}` has no value", i + 1)))?;
        let num = |v: &str| v.parse::<f64>().map_err(|_| CliError::Parse(format!("line {}: bad value `{v}` for `{key}`", i + 1)));
        match key.as_str() {
            "ncols" => ncols = Some(num(val)? as usize),
            "nrows" => nrows = Some(num(val)? as usize),
            "cellsize" | "cellsize_deg" => cellsize = Some(num(val)?),
            "xllcorner" => xll = num(val)?,
            "yllcorner" => yll = num(val)?,
            "nodata_value" | "nodata" => nodata = Some(num(val)?),
            _ => return Err(CliError::Parse(format!("line {}: unknown header `{key}`", i + 1))),
        }
        lines.next();
    }
    let missing = |k: &str| CliError::Parse(format!("header is missing `{k}`"));
    let ncols = ncols.ok_or_else(|| missing("ncols"))?;
    let nrows = nrows.ok_or_else(|| missing("nrows"))?;
    let cellsize = cellsize.ok_or_else(|| missing("cellsize"))?;
    let mut values = Vec::with_capacity(ncols * nrows);
    let mut valid = Vec::with_capacity(ncols * nrows);
    let mut rows = 0;
    for (i, line) in lines {
        rows += 1;
        if rows > nrows {
            return Err(CliError::Parse(format!("line {}: more than {nrows} data rows", i + 1)));
        }
        let before = values.len();
        for tok in line.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|_| CliError::Parse(format!("line {}: bad value `{tok}`", i + 1)))?;
            let ok = nodata.is_none_or(|nd| v != nd);
            if ok && !(v >= 0.0 && v.is_finite()) {
                return Err(CliError::Parse(format!("line {}: negative or non-finite density {v}", i + 1)));
            }
            values.push(if ok { v } else { 0.0 });
            valid.push(ok);
        }
        if values.len() - before != ncols {
            return Err(CliError::Parse(format!("line {}: expected {ncols} values, found {}", i + 1, values.len() - before)));
        }
    }
    if rows != nrows {
        return Err(CliError::Parse(format!("expected {nrows} data rows, found {rows}")));
    }
    Ok(DensityGrid::new(ncols, nrows, cellsize, xll, yll, values, valid)?)
}

pub fn load_density_grid(path: &Path) -> CliResult<DensityGrid> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_ascii_grid(&text).map_err(|e| match e {
        CliError::Parse(m) => CliError::Parse(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn format_ascii_grid(g: &DensityGrid) -> String {
    const NODATA: f64 = -9999.0;
    let mut s = format!(
        "ncols {}\nnrows {}\nxllcorner {}\nyllcorner {}\ncellsize {}\nnodata_value {}\n",
        g.n_cols, g.n_rows, g.lon_min_deg, g.lat_min_deg, g.cellsize_deg, NODATA
    );
    for r in 0..g.n_rows {
        let row: Vec<String> = (0..g.n_cols)
            .map(|c| {
                let i = g.index(r, c);
                if g.valid[i] { g.values[i].to_string() } else { NODATA.to_string() }
            })
            .collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    s
}

pub fn write_ascii_grid(path: &Path, g: &DensityGrid) -> CliResult<()> {
    write_bytes(path, format_ascii_grid(g).as_bytes())
}
