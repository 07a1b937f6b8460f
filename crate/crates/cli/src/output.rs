//! CSV and JSON writers. Every CSV starts with '#'-prefixed metadata lines.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use lambdamix::geometry::RayResult;
use lambdamix::steady::OdPoint;
use lambdamix::{Config, Cplx, FieldState, NormalModes, PulseResult, Result};
use serde::Serialize;

pub struct Outputs {
    dir: PathBuf,
    header: Vec<String>,
    pub written: Vec<PathBuf>,
}

impl Outputs {
    pub fn new(dir: &Path, command: &str, config: &Config) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        let header = vec![
            format!("lambdamix {}", env!("CARGO_PKG_VERSION")),
            format!("command: {command}"),
            format!("config: {}", serde_json::to_string(&config.to_value())?),
        ];
        Ok(Outputs {
            dir: dir.to_path_buf(),
            header,
            written: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn csv(&mut self, name: &str, extra: &[String], columns: &[&str], rows: impl Iterator<Item = Vec<f64>>) -> Result<()> {
        let path = self.path(name);
        let mut w = BufWriter::new(File::create(&path)?);
        for line in self.header.iter().chain(extra) {
            writeln!(w, "# {line}")?;
        }
        writeln!(w, "{}", columns.join(","))?;
        for row in rows {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{}", cells.join(","))?;
        }
        w.flush()?;
        self.written.push(path);
        Ok(())
    }

    pub fn json<S: Serialize>(&mut self, name: &str, value: &S) -> Result<()> {
        let path = self.path(name);
        let mut w = BufWriter::new(File::create(&path)?);
        serde_json::to_writer_pretty(&mut w, value)?;
        writeln!(w)?;
        w.flush()?;
        self.written.push(path);
        Ok(())
    }

    /// z-resolved fields and normal modes.
    pub fn steady_fields(&mut self, fields: &FieldState, modes: &[NormalModes], length_mm: f64) -> Result<()> {
        let cols = [
            "z", "z_mm", "re_p", "im_p", "re_s", "im_s", "abs2_p", "abs2_s", "re_t", "im_t", "re_d", "im_d",
        ];
        let rows = (0..fields.len()).map(|k| {
            let (p, s) = (fields.omega_p[k], fields.omega_s[k]);
            let m = &modes[k];
            vec![
                fields.z[k],
                fields.z[k] * length_mm,
                p.re,
                p.im,
                s.re,
                s.im,
                p.norm_sqr(),
                s.norm_sqr(),
                m.omega_t.re,
                m.omega_t.im,
                m.omega_d.re,
                m.omega_d.im,
            ]
        });
        self.csv("steady.csv", &[], &cols, rows)
    }

    pub fn trace(&mut self, name: &str, r: &PulseResult, gamma_unit: f64) -> Result<()> {
        let cols = [
            "t_over_Gamma", "t_us", "re_p_in", "im_p_in", "re_p_out", "im_p_out", "re_s_out", "im_s_out",
        ];
        let parts = |c: Cplx<f64>| [c.re, c.im];
        let rows = (0..r.t.len()).map(|k| {
            let mut row = vec![r.t[k], r.t[k] / gamma_unit * 1e6];
            row.extend(parts(r.input[k]));
            row.extend(parts(r.probe_out[k]));
            row.extend(parts(r.signal_out[k]));
            row
        });
        self.csv(name, &[], &cols, rows)
    }

    pub fn od_sweep(&mut self, rows: &[OdPoint]) -> Result<()> {
        self.csv(
            "sweep_od.csv",
            &[],
            &["alpha", "T_p", "CE"],
            rows.iter().map(|r| vec![r.alpha, r.t_p, r.ce]),
        )
    }

    pub fn ds_sweep(&mut self, rows: &[(f64, f64, f64)]) -> Result<()> {
        self.csv(
            "sweep_ds.csv",
            &[],
            &["ds_um", "T_p", "T_s"],
            rows.iter().map(|&(d, p, s)| vec![d, p, s]),
        )
    }

    /// Per-ray results, tagged with the separation they belong to.
    pub fn rays(&mut self, rays: &[(f64, Vec<RayResult<f64>>)]) -> Result<()> {
        let rows = rays
            .iter()
            .flat_map(|(ds, rs)| rs.iter().map(move |r| vec![*ds, r.offset_um, r.weight, r.t_p, r.t_s]));
        self.csv("rays.csv", &[], &["ds_um", "offset_um", "weight", "T_p", "T_s"], rows)
    }
}
