//! Field dump format: one text header line `MFGGRID d Nx Nt T kind\n`
//! followed by little-endian `f64` values, time-major, then component, then
//! row-major space (axis 0 fastest).
//!
//! `kind` is the layout name (`node`, `interval`, `spatial`), suffixed with
//! `_vector` for vector fields.

use std::io::{BufRead, Read, Write};

use super::{Grid, Layout, ScalarField, VectorField};
use crate::error::{MfgError, Result};
use crate::real::Real;

const MAGIC: &str = "MFGGRID";

#[derive(Clone, Debug, PartialEq)]
pub struct FieldHeader {
    pub dim: usize,
    pub nx: usize,
    pub nt: usize,
    pub horizon: f64,
    pub layout: Layout,
    pub vector: bool,
}

impl FieldHeader {
    fn line(&self) -> String {
        let suffix = if self.vector { "_vector" } else { "" };
        format!("{MAGIC} {} {} {} {:?} {}{}\n", self.dim, self.nx, self.nt, self.horizon, self.layout.name(), suffix)
    }

    fn parse(line: &str) -> Result<Self> {
        let bad = |why: &str| MfgError::MalformedField(format!("{why} in header {:?}", line.trim_end()));
        let tok: Vec<&str> = line.split_whitespace().collect();
        if tok.len() != 6 || tok[0] != MAGIC {
            return Err(bad("expected 6 tokens starting with MFGGRID"));
        }
        let dim = tok[1].parse().map_err(|_| bad("bad d"))?;
        let nx = tok[2].parse().map_err(|_| bad("bad Nx"))?;
        let nt = tok[3].parse().map_err(|_| bad("bad Nt"))?;
        let horizon = tok[4].parse().map_err(|_| bad("bad T"))?;
        let (kind, vector) = match tok[5].strip_suffix("_vector") {
            Some(k) => (k, true),
            None => (tok[5], false),
        };
        let layout = Layout::from_name(kind).ok_or_else(|| bad("unknown kind"))?;
        Ok(FieldHeader { dim, nx, nt, horizon, layout, vector })
    }

    fn grid<S: Real>(&self) -> Result<Grid<S>> {
        Grid::new(self.dim, self.nx, self.nt, S::c(self.horizon))
            .map_err(|e| MfgError::MalformedField(format!("header describes an invalid grid: {e}")))
    }
}

fn write_values<S: Real>(mut out: impl Write, header: &FieldHeader, data: &[S]) -> Result<()> {
    out.write_all(header.line().as_bytes())?;
    let mut bytes = Vec::with_capacity(data.len() * 8);
    for &x in data {
        bytes.extend_from_slice(&x.as_f64().to_le_bytes());
    }
    out.write_all(&bytes)?;
    Ok(())
}

fn read_values<S: Real>(input: impl Read, want_vector: bool) -> Result<(FieldHeader, Grid<S>, Vec<S>)> {
    let mut reader = std::io::BufReader::new(input);
    let mut line = String::new();
    reader.read_line(&mut line).map_err(|e| MfgError::MalformedField(format!("unreadable header: {e}")))?;
    if !line.ends_with('\n') {
        return Err(MfgError::MalformedField("missing header line".into()));
    }
    let header = FieldHeader::parse(&line)?;
    if header.vector != want_vector {
        return Err(MfgError::MalformedField(format!(
            "expected a {} field, found kind {}",
            if want_vector { "vector" } else { "scalar" },
            if header.vector { "vector" } else { "scalar" }
        )));
    }
    let grid = header.grid::<S>()?;
    let comps = if header.vector { grid.dim() } else { 1 };
    let count = header.layout.slices(grid.nt()) * grid.points() * comps;
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    if bytes.len() != count * 8 {
        return Err(MfgError::MalformedField(format!("expected {} payload bytes, found {}", count * 8, bytes.len())));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| S::c(f64::from_le_bytes(c.try_into().expect("8-byte chunk"))))
        .collect();
    Ok((header, grid, data))
}

fn header_for<S: Real>(grid: &Grid<S>, layout: Layout, vector: bool) -> FieldHeader {
    FieldHeader { dim: grid.dim(), nx: grid.nx(), nt: grid.nt(), horizon: grid.horizon().as_f64(), layout, vector }
}

pub fn write_field<S: Real>(out: impl Write, field: &ScalarField<S>) -> Result<()> {
    write_values(out, &header_for(field.grid(), field.layout(), false), field.data())
}

pub fn write_vector_field<S: Real>(out: impl Write, field: &VectorField<S>) -> Result<()> {
    write_values(out, &header_for(field.grid(), field.layout(), true), field.data())
}

pub fn read_field<S: Real>(input: impl Read) -> Result<ScalarField<S>> {
    let (header, grid, data) = read_values(input, false)?;
    ScalarField::from_vec(&grid, header.layout, data)
}

pub fn read_vector_field<S: Real>(input: impl Read) -> Result<VectorField<S>> {
    let (header, grid, data) = read_values(input, true)?;
    VectorField::from_vec(&grid, header.layout, data)
}
