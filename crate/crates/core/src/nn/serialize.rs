//! Flat CSV parameter files: `layer_name,index,value`, one row per scalar.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::Path;

use super::Parameters;
use crate::error::{Error, Result};

pub fn write_params<P: Parameters + ?Sized, W: Write>(params: &P, mut w: W) -> std::io::Result<()> {
    writeln!(w, "layer_name,index,value")?;
    let mut res = Ok(());
    params.visit("", &mut |p| {
        for (i, v) in p.value.iter().enumerate() {
            if res.is_ok() {
                res = writeln!(w, "{},{},{:.16e}", p.name, i, v);
            }
        }
    });
    res
}

/// Load values into `params`. Every parameter of the model must be present
/// and no unknown rows are allowed.
pub fn read_params<P: Parameters + ?Sized, R: BufRead>(
    params: &mut P,
    r: R,
    path: &Path,
) -> Result<()> {
    let err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut rows: HashMap<(String, usize), f64> = HashMap::new();
    for (n, line) in r.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if n == 0 {
            if line.trim() != "layer_name,index,value" {
                return Err(err(1, format!("bad header '{line}'")));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let mut cols = line.rsplitn(3, ',');
        let (Some(value), Some(index), Some(name)) = (cols.next(), cols.next(), cols.next()) else {
            return Err(err(n + 1, "expected 3 columns".into()));
        };
        let index: usize = index
            .trim()
            .parse()
            .map_err(|e| err(n + 1, format!("{e}")))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|e| err(n + 1, format!("{e}")))?;
        if rows.insert((name.to_string(), index), value).is_some() {
            return Err(err(n + 1, format!("duplicate entry {name}[{index}]")));
        }
    }
    let mut missing = None;
    params.visit_mut("", &mut |p| {
        for (i, v) in p.value.iter_mut().enumerate() {
            match rows.remove(&(p.name.clone(), i)) {
                Some(x) => *v = x,
                None => {
                    missing.get_or_insert_with(|| format!("{}[{i}]", p.name));
                }
            }
        }
    });
    if let Some(m) = missing {
        return Err(err(0, format!("missing parameter {m}")));
    }
    if let Some(((name, i), _)) = rows.into_iter().next() {
        return Err(err(0, format!("unknown parameter {name}[{i}]")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::nn::{DenseParams, LstmCellParams};

    proptest! {
        #[test]
        fn roundtrip_is_exact(values in prop::collection::vec(-1e6f64..1e6, 9)) {
            let mut d = DenseParams::new(2, 3);
            d.set_flat_values(&values);
            let mut buf = Vec::new();
            write_params(&d, &mut buf).unwrap();
            let mut back = DenseParams::new(2, 3);
            read_params(&mut back, &buf[..], Path::new("mem")).unwrap();
            prop_assert_eq!(back.flat_values(), d.flat_values());
        }
    }

    #[test]
    fn missing_and_unknown_rows_rejected() {
        let d = DenseParams::new(2, 1);
        let mut buf = Vec::new();
        write_params(&d, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();

        let truncated: String = text.lines().take(2).map(|l| format!("{l}\n")).collect();
        let mut m = DenseParams::new(2, 1);
        assert!(read_params(&mut m, truncated.as_bytes(), Path::new("t")).is_err());

        let mut cell = LstmCellParams::new(1, 1);
        assert!(read_params(&mut cell, text.as_bytes(), Path::new("t")).is_err());
    }
}
