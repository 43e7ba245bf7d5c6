//! CSV tables and the binary snapshot container.
//!
//! Floats are written with Rust's shortest round-trip formatting, so equal
//! runs produce byte-identical files.

use std::io::{Read, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::Diagnostic;
use crate::states::{Lattice, MomentSet, PhaseSpaceGrid, PositionGrid, WavefunctionGrid, WignerGrid};

pub const MOMENT_HEADER: &str = "t,n,k,value,flavor";
pub const DIAGNOSTIC_HEADER: &str = "t,detC,energy,constraint_residual";
pub const TRAJECTORY_HEADER: &str = "t,xbar,pbar,cxx,cxp,cpp,energy,constraint_residual";

/// Long-format moment rows; `closure` adds a trailing column when given.
pub fn write_moments_csv<'a, W, I>(mut w: W, rows: I, closure: Option<&str>) -> Result<()>
where
    W: Write,
    I: IntoIterator<Item = (f64, &'a MomentSet)>,
{
    match closure {
        Some(_) => writeln!(w, "{MOMENT_HEADER},closure")?,
        None => writeln!(w, "{MOMENT_HEADER}")?,
    }
    for (t, ms) in rows {
        let flavor = ms.flavor().as_str();
        for (n, k, v) in ms.iter() {
            match closure {
                Some(c) => writeln!(w, "{t},{n},{k},{v},{flavor},{c}")?,
                None => writeln!(w, "{t},{n},{k},{v},{flavor}")?,
            }
        }
    }
    Ok(())
}

pub fn write_diagnostics_csv<W: Write>(mut w: W, rows: &[Diagnostic]) -> Result<()> {
    writeln!(w, "{DIAGNOSTIC_HEADER}")?;
    for d in rows {
        writeln!(w, "{},{},{},{}", d.t, d.det_c, d.energy, d.constraint_residual)?;
    }
    Ok(())
}

/// One row of a Gaussian trajectory table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub t: f64,
    pub xbar: f64,
    pub pbar: f64,
    pub cxx: f64,
    pub cxp: f64,
    pub cpp: f64,
    pub energy: f64,
    pub constraint_residual: f64,
}

pub fn write_trajectory_csv<W: Write>(mut w: W, rows: &[TrajectoryRow]) -> Result<()> {
    writeln!(w, "{TRAJECTORY_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            r.t, r.xbar, r.pbar, r.cxx, r.cxp, r.cpp, r.energy, r.constraint_residual
        )?;
    }
    Ok(())
}

const MAGIC: &[u8; 8] = b"PHFLSNP1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SnapshotKind {
    /// Classical density, row-major `nx * np`.
    PhaseSpace,
    /// Wigner function, row-major `nx * np`.
    Wigner,
    /// Interleaved real and imaginary amplitudes, `2 * n` values.
    Wavefunction,
}

/// Everything needed to rebuild a grid from its data block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotHeader {
    pub kind: SnapshotKind,
    pub t: f64,
    pub nx: usize,
    /// Momentum points; zero for wavefunctions.
    pub np: usize,
    pub x_min: f64,
    pub dx: f64,
    pub p_min: f64,
    pub dp: f64,
    pub hbar: Option<f64>,
    pub mass: Option<f64>,
}

impl SnapshotHeader {
    fn expected_len(&self) -> usize {
        match self.kind {
            SnapshotKind::Wavefunction => 2 * self.nx,
            _ => self.nx * self.np,
        }
    }

    fn lattice(&self) -> Lattice {
        Lattice {
            nx: self.nx,
            np: self.np,
            x_min: self.x_min,
            dx: self.dx,
            p_min: self.p_min,
            dp: self.dp,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub header: SnapshotHeader,
    pub data: Vec<f64>,
}

fn lattice_header(kind: SnapshotKind, t: f64, l: &Lattice, hbar: Option<f64>) -> SnapshotHeader {
    SnapshotHeader {
        kind,
        t,
        nx: l.nx,
        np: l.np,
        x_min: l.x_min,
        dx: l.dx,
        p_min: l.p_min,
        dp: l.dp,
        hbar,
        mass: None,
    }
}

impl Snapshot {
    pub fn from_phase_space(f: &PhaseSpaceGrid, t: f64) -> Self {
        Snapshot {
            header: lattice_header(SnapshotKind::PhaseSpace, t, &f.lattice, None),
            data: f.values.clone(),
        }
    }

    pub fn from_wigner(w: &WignerGrid, t: f64) -> Self {
        Snapshot {
            header: lattice_header(SnapshotKind::Wigner, t, &w.lattice, Some(w.hbar)),
            data: w.values.clone(),
        }
    }

    pub fn from_wavefunction(w: &WavefunctionGrid, t: f64) -> Self {
        let g = w.grid();
        Snapshot {
            header: SnapshotHeader {
                kind: SnapshotKind::Wavefunction,
                t,
                nx: g.n,
                np: 0,
                x_min: g.x_min,
                dx: g.dx,
                p_min: 0.0,
                dp: g.dp(w.hbar()),
                hbar: Some(w.hbar()),
                mass: Some(w.mass()),
            },
            data: w.amplitudes().iter().flat_map(|z| [z.re, z.im]).collect(),
        }
    }

    fn expect(&self, kind: SnapshotKind) -> Result<()> {
        if self.header.kind != kind {
            return Err(Error::Format(format!(
                "snapshot holds {:?}, not {kind:?}",
                self.header.kind
            )));
        }
        Ok(())
    }

    pub fn to_phase_space(&self) -> Result<PhaseSpaceGrid> {
        self.expect(SnapshotKind::PhaseSpace)?;
        PhaseSpaceGrid::new(self.header.lattice(), self.data.clone())
    }

    pub fn to_wigner(&self) -> Result<WignerGrid> {
        self.expect(SnapshotKind::Wigner)?;
        let hbar = self
            .header
            .hbar
            .ok_or_else(|| Error::Format("wigner snapshot without hbar".into()))?;
        Ok(WignerGrid {
            lattice: self.header.lattice(),
            values: self.data.clone(),
            hbar,
        })
    }

    /// Rebuilds the wavefunction without renormalizing it.
    pub fn to_wavefunction(&self) -> Result<WavefunctionGrid> {
        self.expect(SnapshotKind::Wavefunction)?;
        let h = &self.header;
        let (hbar, mass) = h
            .hbar
            .zip(h.mass)
            .ok_or_else(|| Error::Format("wavefunction snapshot without hbar or mass".into()))?;
        if !(hbar > 0.0 && mass > 0.0) {
            return Err(Error::Format("hbar and mass must be positive".into()));
        }
        let grid = PositionGrid::new(h.nx, h.x_min, h.dx)?;
        let psi = self.data.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect();
        Ok(WavefunctionGrid::from_raw_parts(grid, psi, hbar, mass))
    }

    /// `PHFLSNP1`, the header length as a little-endian `u64`, the JSON
    /// header, then the data as little-endian `f64`.
    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        let header = serde_json::to_vec(&self.header)?;
        w.write_all(MAGIC)?;
        w.write_all(&(header.len() as u64).to_le_bytes())?;
        w.write_all(&header)?;
        let mut buf = Vec::with_capacity(8 * self.data.len());
        for v in &self.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("not a snapshot file".into()));
        }
        let mut len = [0u8; 8];
        r.read_exact(&mut len)?;
        let len = u64::from_le_bytes(len);
        if len > 1 << 20 {
            return Err(Error::Format(format!("header length {len} is implausible")));
        }
        let mut header = vec![0u8; len as usize];
        r.read_exact(&mut header)?;
        let header: SnapshotHeader = serde_json::from_slice(&header)?;
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        if bytes.len() != 8 * header.expected_len() {
            return Err(Error::Format(format!(
                "expected {} values, found {} bytes",
                header.expected_len(),
                bytes.len()
            )));
        }
        let data = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        Ok(Snapshot { header, data })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{moments_from_gaussian, wigner_transform, Flavor, GaussianState};
    use proptest::prelude::*;

    #[test]
    fn moment_rows_follow_the_schema() {
        let g = GaussianState::new(0.5, 0.0, 1.0, 0.0, 1.0).unwrap();
        let ms = moments_from_gaussian(&g, 2, Flavor::QuantumWeyl);
        let mut out = Vec::new();
        write_moments_csv(&mut out, [(0.25, &ms)], Some("gaussian-wick")).unwrap();
        let text = String::from_utf8(out).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t,n,k,value,flavor,closure"));
        assert_eq!(lines.next(), Some("0.25,0,0,1,quantum,gaussian-wick"));
        assert_eq!(text.lines().count(), 1 + ms.values().len());
    }

    #[test]
    fn wavefunction_and_wigner_round_trip() {
        let g = GaussianState::pure(0.3, -0.5, 0.4, 0.1, 1.0).unwrap();
        let w = WavefunctionGrid::from_gaussian(&g, PositionGrid::centered(64, 0.0, 8.0).unwrap(), 1.0, 2.0).unwrap();
        let mut buf = Vec::new();
        Snapshot::from_wavefunction(&w, 1.5).write(&mut buf).unwrap();
        let back = Snapshot::read(&buf[..]).unwrap();
        assert_eq!(back.header.t, 1.5);
        assert_eq!(back.to_wavefunction().unwrap(), w);
        let f = wigner_transform(&w).unwrap();
        let mut buf = Vec::new();
        Snapshot::from_wigner(&f, 0.0).write(&mut buf).unwrap();
        assert_eq!(Snapshot::read(&buf[..]).unwrap().to_wigner().unwrap(), f);
    }

    #[test]
    fn corrupt_files_are_rejected() {
        assert!(matches!(
            Snapshot::read(&b"NOTASNAP\0\0\0\0\0\0\0\0"[..]),
            Err(Error::Format(_))
        ));
        let f = PhaseSpaceGrid::from_gaussian(
            &GaussianState::new(0.0, 0.0, 1.0, 0.0, 1.0).unwrap(),
            Lattice::centered(8, 8, 0.0, 4.0, 0.0, 4.0).unwrap(),
        )
        .unwrap();
        let mut buf = Vec::new();
        Snapshot::from_phase_space(&f, 0.0).write(&mut buf).unwrap();
        buf.pop();
        assert!(matches!(Snapshot::read(&buf[..]), Err(Error::Format(_))));
        let whole = Snapshot::from_phase_space(&f, 0.0);
        assert!(whole.to_wigner().is_err());
    }

    proptest! {
        #[test]
        fn phase_space_snapshots_round_trip(
            values in prop::collection::vec(-1e300f64..1e300, 16),
            t in -1e3f64..1e3,
            x_min in -10.0f64..0.0,
            dx in 1e-3f64..1.0,
        ) {
            let l = Lattice { nx: 4, np: 4, x_min, dx, p_min: -1.0, dp: 0.5 };
            let f = PhaseSpaceGrid::new(l, values).unwrap();
            let mut buf = Vec::new();
            Snapshot::from_phase_space(&f, t).write(&mut buf).unwrap();
            let back = Snapshot::read(&buf[..]).unwrap();
            prop_assert_eq!(back.header.t, t);
            prop_assert_eq!(back.to_phase_space().unwrap(), f);
        }
    }
}
