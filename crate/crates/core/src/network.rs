//! Network files: one convolution layer per line, `name,I_h,I_w,K,IC,OC[,G[,stride]]`.
//!
//! Blank lines and `#` comments are ignored, as is a header line whose second field is
//! not a number.

use std::path::Path;

use log::warn;

use crate::error::{Error, Result};
use crate::model::LayerSpec;

const BUNDLED: [(&str, &str); 4] = [
    ("cnn8", include_str!("../networks/cnn8.csv")),
    ("inception", include_str!("../networks/inception.csv")),
    ("densenet40", include_str!("../networks/densenet40.csv")),
    ("tiny", include_str!("../networks/tiny.csv")),
];

/// Names of the networks shipped with the crate.
pub fn bundled_names() -> Vec<&'static str> {
    BUNDLED.iter().map(|(n, _)| *n).collect()
}

pub fn bundled_network(name: &str) -> Option<Result<Vec<LayerSpec>>> {
    BUNDLED
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| parse_network(text))
}

pub fn load_network(path: impl AsRef<Path>) -> Result<Vec<LayerSpec>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::Parse {
        line: 0,
        message: format!("{}: {e}", path.display()),
    })?;
    parse_network(&text)
}

fn field(cols: &[&str], i: usize, name: &'static str, line: usize) -> Result<u32> {
    cols[i].parse::<u32>().map_err(|_| Error::Parse {
        line,
        message: format!("bad {name} `{}` in `{}`", cols[i], cols.join(",")),
    })
}

fn kernel_field(s: &str, line: usize) -> Result<u32> {
    if let Some((a, b)) = s.split_once(['x', 'X']) {
        if a.trim() != b.trim() {
            return Err(Error::Layer {
                name: format!("line {line}"),
                source: Box::new(Error::RectangularKernel(s.to_string())),
            });
        }
        return kernel_field(a.trim(), line);
    }
    s.parse::<u32>().map_err(|_| Error::Parse {
        line,
        message: format!("bad K `{s}`"),
    })
}

pub fn parse_network(text: &str) -> Result<Vec<LayerSpec>> {
    let mut layers = Vec::new();
    let mut first = true;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let cols: Vec<&str> = body.split(',').map(str::trim).collect();
        let header = std::mem::replace(&mut first, false);
        if header && cols.len() > 1 && cols[1].parse::<u32>().is_err() {
            continue;
        }
        if !(6..=8).contains(&cols.len()) {
            return Err(Error::Parse {
                line,
                message: format!("expected name,I_h,I_w,K,IC,OC[,G[,stride]], got `{body}`"),
            });
        }
        let name = cols[0].to_string();
        let i_h = field(&cols, 1, "I_h", line)?;
        let i_w = field(&cols, 2, "I_w", line)?;
        let k = kernel_field(cols[3], line)?;
        let ic = field(&cols, 4, "IC", line)?;
        let oc = field(&cols, 5, "OC", line)?;
        let g = if cols.len() > 6 { field(&cols, 6, "G", line)? } else { 1 };
        if cols.len() > 7 {
            let stride = field(&cols, 7, "stride", line)?;
            if stride != 1 {
                return Err(Error::Layer {
                    name,
                    source: Box::new(Error::NonUnitStride(stride)),
                });
            }
        }
        let layer = LayerSpec::new(name.clone(), i_h, i_w, k, ic, oc, g).map_err(|e| Error::Layer {
            name,
            source: Box::new(e),
        })?;
        layers.push(layer);
    }
    if layers.is_empty() {
        warn!("network has no layers");
    }
    Ok(layers)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_row_parses() {
        let n = parse_network("2,18,18,3,24,32,1\n").unwrap();
        assert_eq!(n, vec![LayerSpec::new("2", 18, 18, 3, 24, 32, 1).unwrap()]);
    }

    #[test]
    fn empty_file_is_empty_network() {
        assert!(parse_network("").unwrap().is_empty());
        assert!(parse_network("# nothing\n\n").unwrap().is_empty());
    }

    #[test]
    fn malformed_row_names_line() {
        let e = parse_network("name,I_h,I_w,K,IC,OC,G\n2,18,18,3,24,32,1\n3,18,x,3,32,32,1\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, .. }), "{e}");
        assert!(e.to_string().contains("3,18,x"));
    }

    #[test]
    fn validation_error_names_layer() {
        let e = parse_network("bad,5,5,3,5,3,2\n").unwrap_err();
        assert!(e.to_string().starts_with("layer bad:"), "{e}");
    }

    #[test]
    fn stride_and_kernel_shape() {
        assert!(parse_network("a,8,8,3,4,4,1,1\n").is_ok());
        assert!(parse_network("a,8,8,3,4,4,1,2\n").is_err());
        assert!(parse_network("a,8,8,3x3,4,4\n").is_ok());
        assert!(parse_network("a,8,8,3x5,4,4\n").is_err());
    }

    #[test]
    fn bundled_networks_load() {
        for name in bundled_names() {
            let n = bundled_network(name).unwrap().unwrap();
            assert!(!n.is_empty(), "{name}");
        }
        assert_eq!(bundled_network("cnn8").unwrap().unwrap().len(), 6);
        assert_eq!(bundled_network("inception").unwrap().unwrap().len(), 8);
        assert_eq!(bundled_network("densenet40").unwrap().unwrap().len(), 39);
        assert!(bundled_network("vgg").is_none());
    }
}
