//! Legacy-VTK mesh output and a plain-text dump of the constraint table.

use std::io::{self, Write};

use super::adaptive::{AdaptiveMesh, HangingKind};
use crate::Real;

/// Writes an ASCII unstructured grid of tetrahedra. `point_data` adds named
/// per-vertex scalar fields; the refinement level is always written per cell.
pub fn write_vtk<T: Real, W: Write>(mesh: &AdaptiveMesh<T>, point_data: &[(&str, &[T])], mut w: W) -> io::Result<()> {
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "cfpe adaptive mesh")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {} double", mesh.vertices().len())?;
    for p in mesh.vertices() {
        writeln!(w, "{} {} {}", p[0], p[1], p[2])?;
    }
    let n = mesh.elements().len();
    writeln!(w, "CELLS {n} {}", 5 * n)?;
    for e in mesh.elements() {
        let v = e.vertices;
        writeln!(w, "4 {} {} {} {}", v[0], v[1], v[2], v[3])?;
    }
    writeln!(w, "CELL_TYPES {n}")?;
    for _ in 0..n {
        writeln!(w, "10")?;
    }
    writeln!(w, "CELL_DATA {n}")?;
    writeln!(w, "SCALARS level int 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for e in mesh.elements() {
        writeln!(w, "{}", mesh.leaf_level(e.leaf as usize))?;
    }
    if !point_data.is_empty() {
        writeln!(w, "POINT_DATA {}", mesh.vertices().len())?;
        for (name, values) in point_data {
            assert_eq!(values.len(), mesh.vertices().len(), "field {name} has wrong length");
            writeln!(w, "SCALARS {name} double 1")?;
            writeln!(w, "LOOKUP_TABLE default")?;
            for v in values.iter() {
                writeln!(w, "{:e}", v.to_f64_lossy())?;
            }
        }
    }
    Ok(())
}

/// One line per hanging vertex:
/// `vertex kind master0 master1 weight0 weight1 | dof:weight ...`.
pub fn write_hanging_table<T: Real, W: Write>(mesh: &AdaptiveMesh<T>, mut w: W) -> io::Result<()> {
    writeln!(w, "# vertex kind master0 master1 weight0 weight1 | resolved dof:weight")?;
    for h in mesh.hanging_nodes() {
        let kind = match h.kind {
            HangingKind::Edge => "edge",
            HangingKind::Face => "face",
        };
        write!(
            w,
            "{} {kind} {} {} {} {} |",
            h.vertex, h.masters[0], h.masters[1], h.weights[0], h.weights[1]
        )?;
        for (d, wt) in mesh.dofs().expansion(h.vertex) {
            write!(w, " {d}:{wt}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{Domain, Octree};

    #[test]
    fn vtk_header_counts() {
        let m = AdaptiveMesh::<f64>::uniform(Domain::unit_cube(), 1).unwrap();
        let vals = vec![1.0; 27];
        let mut buf = Vec::new();
        write_vtk(&m, &[("density", &vals)], &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.contains("POINTS 27 double"));
        assert!(s.contains("CELLS 48 240"));
        assert!(s.contains("SCALARS density double 1"));
    }

    #[test]
    fn hanging_table_lists_every_node() {
        let mut tree = Octree::new(2);
        tree.split(0);
        tree.split(tree.cell(0).first_child);
        let m = AdaptiveMesh::<f64>::from_octree(Domain::unit_cube(), tree).unwrap();
        let mut buf = Vec::new();
        write_hanging_table(&m, &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s.lines().count(), 1 + m.stats().hanging);
        assert!(s.lines().skip(1).all(|l| l.contains(" 0.5 0.5 |")));
    }
}
