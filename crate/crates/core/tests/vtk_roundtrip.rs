use cutcell_kinetic::output::{write_fields, FieldSnapshot};
use cutcell_kinetic::scenarios::{plates_scenario, Resolution};
use cutcell_kinetic::solver::Simulation;
use vtkio::model::{Attribute, DataSet, Extent, IOBuffer, Piece};
use vtkio::Vtk;

fn f64s(buf: &IOBuffer) -> Vec<f64> {
    match buf {
        IOBuffer::F64(v) => v.clone(),
        IOBuffer::F32(v) => v.iter().map(|&x| x as f64).collect(),
        other => panic!("unexpected buffer {other:?}"),
    }
}

fn ints(buf: &IOBuffer) -> Vec<i64> {
    match buf {
        IOBuffer::I32(v) => v.iter().map(|&x| x as i64).collect(),
        IOBuffer::I64(v) => v.clone(),
        IOBuffer::U32(v) => v.iter().map(|&x| x as i64).collect(),
        other => panic!("unexpected buffer {other:?}"),
    }
}

#[test]
fn snapshot_reads_back_identically() {
    let spec = plates_scenario(
        0.5,
        Resolution {
            nx: 40,
            ny: 20,
            nv: 8,
        },
    )
    .unwrap();
    let mut sim = Simulation::new(spec.setup()).unwrap();
    for _ in 0..3 {
        sim.advance(None).unwrap();
    }
    let snap = FieldSnapshot::capture(&sim);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fields_3.vtk");
    write_fields(&snap, &path).unwrap();

    let vtk = Vtk::import(&path).unwrap();
    let attrs = match vtk.data {
        DataSet::ImageData { extent, pieces, .. } => {
            assert_eq!(extent, Extent::Dims([40, 20, 1]));
            match pieces.into_iter().next().unwrap() {
                Piece::Inline(p) => p.data.point,
                _ => panic!("expected inline piece"),
            }
        }
        other => panic!("unexpected dataset {other:?}"),
    };
    let n = 40 * 20;
    let mut seen = Vec::new();
    for attr in &attrs {
        if let Attribute::DataArray(arr) = attr {
            seen.push(arr.name.clone());
            match arr.name.as_str() {
                "rho" => assert_eq!(f64s(&arr.data), snap.rho),
                "T" => assert_eq!(f64s(&arr.data), snap.temperature),
                "P" => assert_eq!(f64s(&arr.data), snap.pressure),
                "u" => {
                    let u = f64s(&arr.data);
                    assert_eq!(u.len(), 3 * n);
                    for (k, v) in snap.u.iter().enumerate() {
                        assert_eq!([u[3 * k], u[3 * k + 1], u[3 * k + 2]], [v.x, v.y, 0.0]);
                    }
                }
                "cell_type" => {
                    let ct = ints(&arr.data);
                    assert_eq!(
                        ct,
                        snap.cell_type.iter().map(|&c| c as i64).collect::<Vec<_>>()
                    );
                }
                other => panic!("unexpected array {other}"),
            }
        }
    }
    seen.sort();
    assert_eq!(seen, ["P", "T", "cell_type", "rho", "u"]);
}

#[test]
fn solid_cells_are_zero_with_code_two() {
    let spec = plates_scenario(
        0.5,
        Resolution {
            nx: 80,
            ny: 40,
            nv: 8,
        },
    )
    .unwrap();
    let sim = Simulation::new(spec.setup()).unwrap();
    let snap = FieldSnapshot::capture(&sim);
    let solid: Vec<usize> = (0..snap.cell_type.len())
        .filter(|&c| snap.cell_type[c] == 2)
        .collect();
    assert!(!solid.is_empty());
    for c in solid {
        assert_eq!(snap.rho[c], 0.0);
        assert_eq!(snap.pressure[c], 0.0);
    }
    let gas: Vec<f64> = (0..snap.rho.len())
        .filter(|&c| snap.cell_type[c] == 0)
        .map(|c| snap.rho[c])
        .collect();
    assert!(gas.iter().all(|&r| r == gas[0]));
}
