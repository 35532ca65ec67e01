//! Solution snapshots (legacy ASCII VTK) and convergence logs (CSV).

use std::fmt::Write as _;
use std::io::{self, BufRead, Write};

use crate::euler::{GasModel, State};
use crate::mesh::Mesh;
use crate::solver::ConvergenceRecord;

pub const CSV_HEADER: &str = "step,dt,residual,entropy_residual,omega,newton_iters,linear_iters,wall_ms";

/// Writes an unstructured grid with density, pressure, Mach number and velocity
/// at the vertices.
pub fn write_vtk<W: Write>(mut w: W, mesh: &Mesh, u: &[State], gas: &GasModel, title: &str) -> io::Result<()> {
    assert_eq!(mesh.num_vertices(), u.len(), "one state per vertex");
    let mut s = String::new();
    let title: String = title.chars().filter(|c| *c != '\n').take(255).collect();
    let _ = writeln!(s, "# vtk DataFile Version 3.0\n{title}\nASCII\nDATASET UNSTRUCTURED_GRID");
    let _ = writeln!(s, "POINTS {} double", mesh.vertices.len());
    for p in &mesh.vertices {
        let _ = writeln!(s, "{:.16e} {:.16e} 0", p.x, p.y);
    }
    let nt = mesh.triangles.len();
    let _ = writeln!(s, "CELLS {} {}", nt, 4 * nt);
    for t in &mesh.triangles {
        let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
    }
    let _ = writeln!(s, "CELL_TYPES {nt}");
    for _ in 0..nt {
        s.push_str("5\n");
    }
    let _ = writeln!(s, "POINT_DATA {}", u.len());
    let scalar = |s: &mut String, name: &str, f: &dyn Fn(&State) -> f64| {
        let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
        for x in u {
            let _ = writeln!(s, "{:.16e}", f(x));
        }
    };
    scalar(&mut s, "density", &|x| x[0]);
    scalar(&mut s, "pressure", &|x| gas.pressure_unchecked(x));
    scalar(&mut s, "mach", &|x| gas.mach(x).unwrap_or(f64::NAN));
    s.push_str("VECTORS velocity double\n");
    for x in u {
        let _ = writeln!(s, "{:.16e} {:.16e} 0", x[1] / x[0], x[2] / x[0]);
    }
    w.write_all(s.as_bytes())
}

/// Floats are printed with 17 significant digits so they re-parse exactly.
pub fn write_convergence_csv<W: Write>(mut w: W, records: &[ConvergenceRecord]) -> io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in records {
        writeln!(
            w,
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{},{},{:.16e}",
            r.step, r.dt, r.residual, r.entropy_residual, r.omega, r.newton_iters, r.linear_iters, r.wall_ms
        )?;
    }
    Ok(())
}

pub fn read_convergence_csv<R: BufRead>(r: R) -> io::Result<Vec<ConvergenceRecord>> {
    let bad = |line: usize, msg: &str| io::Error::new(io::ErrorKind::InvalidData, format!("line {line}: {msg}"));
    let mut lines = r.lines();
    let header = lines.next().transpose()?;
    if header.as_deref().map(str::trim) != Some(CSV_HEADER) {
        return Err(bad(1, "missing header"));
    }
    let mut out = Vec::new();
    for (k, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 8 {
            return Err(bad(k + 2, "expected 8 fields"));
        }
        let float = |i: usize| f[i].trim().parse::<f64>().map_err(|_| bad(k + 2, "bad number"));
        let int = |i: usize| f[i].trim().parse::<usize>().map_err(|_| bad(k + 2, "bad integer"));
        out.push(ConvergenceRecord {
            step: int(0)?,
            dt: float(1)?,
            residual: float(2)?,
            entropy_residual: float(3)?,
            omega: float(4)?,
            newton_iters: int(5)?,
            linear_iters: int(6)?,
            wall_ms: float(7)?,
        });
    }
    Ok(out)
}
