//! Legacy ASCII VTK snapshots: every element is sampled on a uniform `s^3` lattice and
//! written as `(s-1)^3` hexahedra. Points on shared faces are duplicated, so
//! discontinuous normal or tangential components show up as they are.

use std::io::Write;

use crate::complex::DeRhamComplex;
use crate::error::Result;
use crate::field::DiscreteField;
use crate::scalar::vec3::V3;
use crate::scalar::Real;

const VTK_HEXAHEDRON: u8 = 12;

/// A named field to sample.
pub struct NamedField<'a, T> {
    pub name: &'a str,
    pub field: &'a DiscreteField<T>,
}

fn lattice<T: Real>(samples: usize) -> Vec<V3<T>> {
    let s = samples.max(2);
    let coord = |i: usize| T::lit(-1.0 + 2.0 * i as f64 / (s - 1) as f64);
    let mut pts = Vec::with_capacity(s * s * s);
    for k in 0..s {
        for j in 0..s {
            for i in 0..s {
                pts.push([coord(i), coord(j), coord(k)]);
            }
        }
    }
    pts
}

/// Writes the snapshot. Scalar spaces are written as `SCALARS`, vector spaces as `VECTORS`.
pub fn write_snapshot<T: Real, W: Write>(
    out: &mut W,
    complex: &DeRhamComplex<T>,
    fields: &[NamedField<'_, T>],
    samples: usize,
    title: &str,
) -> Result<()> {
    let s = samples.max(2);
    let local = lattice::<T>(s);
    let mesh = complex.mesh();
    let ne = mesh.num_elements();
    let per = local.len();
    let np = ne * per;
    let cells_per = (s - 1).pow(3);

    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(out, "{}", title.replace('\n', " "))?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(out, "POINTS {np} double")?;
    for e in 0..ne {
        for xi in &local {
            let x = mesh.local_to_physical(e, xi);
            writeln!(out, "{} {} {}", x[0], x[1], x[2])?;
        }
    }
    let nc = ne * cells_per;
    writeln!(out, "CELLS {} {}", nc, nc * 9)?;
    let id = |i: usize, j: usize, k: usize| i + s * (j + s * k);
    for e in 0..ne {
        let base = e * per;
        for k in 0..s - 1 {
            for j in 0..s - 1 {
                for i in 0..s - 1 {
                    let v = [
                        id(i, j, k),
                        id(i + 1, j, k),
                        id(i + 1, j + 1, k),
                        id(i, j + 1, k),
                        id(i, j, k + 1),
                        id(i + 1, j, k + 1),
                        id(i + 1, j + 1, k + 1),
                        id(i, j + 1, k + 1),
                    ];
                    write!(out, "8")?;
                    for q in v {
                        write!(out, " {}", base + q)?;
                    }
                    writeln!(out)?;
                }
            }
        }
    }
    writeln!(out, "CELL_TYPES {nc}")?;
    for _ in 0..nc {
        writeln!(out, "{VTK_HEXAHEDRON}")?;
    }
    writeln!(out, "POINT_DATA {np}")?;
    for f in fields {
        let vector = f.field.space.is_vector();
        if vector {
            writeln!(out, "VECTORS {} double", f.name)?;
        } else {
            writeln!(out, "SCALARS {} double 1", f.name)?;
            writeln!(out, "LOOKUP_TABLE default")?;
        }
        for e in 0..ne {
            for v in complex.evaluate_field(f.field, e, &local)? {
                if vector {
                    writeln!(out, "{} {} {}", v[0], v[1], v[2])?;
                } else {
                    writeln!(out, "{}", v[0])?;
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::Assembler;
    use crate::complex::SpaceTag;
    use crate::mesh::{BoxDomain, HexMesh, MappingSpec};
    use std::sync::Arc;

    #[test]
    fn snapshot_layout() {
        let mesh = HexMesh::build(2, BoxDomain::unit(), MappingSpec::affine()).unwrap();
        let asm = Assembler::new(Arc::new(DeRhamComplex::build(mesh, 1).unwrap())).unwrap();
        let u = asm.interpolate(SpaceTag::D, &|x: &V3<f64>, _| [x[0], 0.0, 0.0], 0.0);
        let p = asm.interpolate(SpaceTag::S, &|_: &V3<f64>, _| [2.0, 0.0, 0.0], 0.0);
        let mut buf = Vec::new();
        let fields = [NamedField { name: "u", field: &u }, NamedField { name: "p", field: &p }];
        write_snapshot(&mut buf, asm.complex(), &fields, 3, "test").unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("# vtk DataFile Version 3.0\n"));
        assert!(text.contains("POINTS 216 double"));
        assert!(text.contains("CELLS 64 576"));
        assert!(text.contains("VECTORS u double"));
        let scalars: Vec<f64> = text
            .split("LOOKUP_TABLE default\n")
            .nth(1)
            .unwrap()
            .lines()
            .map(|l| l.parse().unwrap())
            .collect();
        assert_eq!(scalars.len(), 216);
        // constants are reproduced exactly on an affine mesh
        assert!(scalars.iter().all(|v| (v - 2.0).abs() < 1e-12));
    }
}
