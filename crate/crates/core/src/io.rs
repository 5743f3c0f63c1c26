//! CSV export with 17 significant digits, so that written values round-trip
//! bit-exactly and identical runs produce identical files.

use std::io::{self, Write};

use crate::grid::ScalarField;

/// `{:.16e}` formatting (17 significant digits); masked values print as `nan`.
pub fn fmt17(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else {
        format!("{v:.16e}")
    }
}

/// Writes `x,y,<names...>` rows in node order for fields sharing one grid.
pub fn write_fields_csv<W: Write>(
    mut w: W,
    names: &[&str],
    fields: &[&ScalarField],
) -> io::Result<()> {
    assert_eq!(names.len(), fields.len(), "one column name per field");
    let g = *fields
        .first()
        .map(|f| f.grid())
        .expect("at least one field");
    if fields.iter().any(|f| *f.grid() != g) {
        return Err(io::Error::new(io::ErrorKind::InvalidInput, "fields on different grids"));
    }
    write!(w, "x,y")?;
    for n in names {
        write!(w, ",{n}")?;
    }
    writeln!(w)?;
    for j in 0..g.ny {
        for i in 0..g.nx {
            write!(w, "{},{}", fmt17(g.x(i)), fmt17(g.y(j)))?;
            for f in fields {
                write!(w, ",{}", fmt17(f.at(i, j)))?;
            }
            writeln!(w)?;
        }
    }
    Ok(())
}

/// Single-field CSV with header `x,y,value`.
pub fn write_field_csv<W: Write>(w: W, field: &ScalarField) -> io::Result<()> {
    write_fields_csv(w, &["value"], &[field])
}
