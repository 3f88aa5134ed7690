//! Weight matrices as decimal CSV, one row per output channel or neuron.
//!
//! Layer `i` (0-based) reads `layer<i>_weight.csv` and `layer<i>_bias.csv`.
//! A convolution row holds `c_in·k·k` values in `(c_in, di, dj)` order; a
//! fully connected row holds `in_ch` values; a bias file holds one value per
//! row. Residual blocks add `layer<i>_2_*` for the second convolution and
//! `layer<i>_shortcut_*` for a projection shortcut. A missing bias file
//! means zero bias.

use std::fs;
use std::path::Path;

use snnhe_core::approx::ChebyshevSeries;
use snnhe_core::layers::{ConvSpec, ConvWeights, FcWeights};
use snnhe_core::network::{residual_specs, Layer, LayerWeights, NetworkSpec, NetworkWeights};

use crate::error::{format_err, Error, Result};

fn parse_matrix(text: &str) -> snnhe_core::Result<Vec<Vec<f64>>> {
    let mut rd = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    rd.records()
        .enumerate()
        .map(|(r, rec)| {
            let rec = rec.map_err(|e| format_err(format!("row {}: {e}", r + 1)))?;
            rec.iter()
                .map(|f| {
                    f.parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| format_err(format!("row {}: `{f}` is not a finite number", r + 1)))
                })
                .collect()
        })
        .collect()
}

fn write_matrix(path: &Path, rows: &[f64], cols: usize) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows.chunks(cols.max(1)) {
        w.write_record(row.iter().map(|v| format!("{v:?}")))
            .map_err(|e| format_err(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| format_err(e.to_string()))?;
    fs::write(path, bytes).map_err(Error::io(path))
}

/// Reads a `rows×cols` matrix, rejecting any other shape.
fn read_shaped(path: &Path, rows: usize, cols: usize) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(Error::io(path))?;
    let m = parse_matrix(&text).map_err(Error::in_file(path))?;
    let shape_err = |got: String| {
        Error::in_file(path)(snnhe_core::Error::Validation(format!(
            "expected {rows}x{cols} values, found {got}"
        )))
    };
    if m.len() != rows {
        return Err(shape_err(format!("{} rows", m.len())));
    }
    if let Some((r, row)) = m.iter().enumerate().find(|(_, row)| row.len() != cols) {
        return Err(shape_err(format!("{} values in row {}", row.len(), r + 1)));
    }
    Ok(m.into_iter().flatten().collect())
}

fn read_bias(path: &Path, n: usize) -> Result<Vec<f64>> {
    if path.exists() {
        read_shaped(path, n, 1)
    } else {
        Ok(vec![0.0; n])
    }
}

fn load_conv(dir: &Path, stem: &str, spec: &ConvSpec) -> Result<ConvWeights> {
    Ok(ConvWeights {
        kernel: read_shaped(
            &dir.join(format!("{stem}_weight.csv")),
            spec.c_out,
            spec.c_in * spec.kernel * spec.kernel,
        )?,
        bias: read_bias(&dir.join(format!("{stem}_bias.csv")), spec.c_out)?,
    })
}

fn save_conv(dir: &Path, stem: &str, spec: &ConvSpec, w: &ConvWeights) -> Result<()> {
    write_matrix(&dir.join(format!("{stem}_weight.csv")), &w.kernel, spec.c_in * spec.kernel * spec.kernel)?;
    write_matrix(&dir.join(format!("{stem}_bias.csv")), &w.bias, 1)
}

pub fn load_weights_csv(dir: &Path, net: &NetworkSpec) -> Result<NetworkWeights> {
    let layers = net
        .layers
        .iter()
        .enumerate()
        .map(|(i, layer)| -> Result<LayerWeights> {
            let stem = format!("layer{i}");
            Ok(match *layer {
                Layer::Conv { in_ch, out_ch, kernel, stride, padding, .. } => LayerWeights::Conv(load_conv(
                    dir,
                    &stem,
                    &ConvSpec { c_in: in_ch, c_out: out_ch, kernel, stride, padding },
                )?),
                Layer::Fc { in_ch, out_ch, .. } => LayerWeights::Fc(FcWeights {
                    weight: read_shaped(&dir.join(format!("{stem}_weight.csv")), out_ch, in_ch)?,
                    bias: read_bias(&dir.join(format!("{stem}_bias.csv")), out_ch)?,
                }),
                Layer::ResidualBlock { in_ch, out_ch, kernel, stride, padding, .. } => {
                    let r = residual_specs(in_ch, out_ch, kernel, stride, padding);
                    LayerWeights::Residual {
                        first: load_conv(dir, &stem, &r.first)?,
                        second: load_conv(dir, &format!("{stem}_2"), &r.second)?,
                        shortcut: r
                            .shortcut
                            .map(|s| load_conv(dir, &format!("{stem}_shortcut"), &s))
                            .transpose()?,
                    }
                }
                Layer::Avgpool { .. } | Layer::Lif { .. } => LayerWeights::None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let w = NetworkWeights { layers };
    w.check(net)?;
    Ok(w)
}

pub fn save_weights_csv(dir: &Path, net: &NetworkSpec, weights: &NetworkWeights) -> Result<()> {
    weights.check(net)?;
    fs::create_dir_all(dir).map_err(Error::io(dir))?;
    for (i, (layer, w)) in net.layers.iter().zip(&weights.layers).enumerate() {
        let stem = format!("layer{i}");
        match (layer, w) {
            (&Layer::Conv { in_ch, out_ch, kernel, stride, padding, .. }, LayerWeights::Conv(cw)) => {
                save_conv(dir, &stem, &ConvSpec { c_in: in_ch, c_out: out_ch, kernel, stride, padding }, cw)?
            }
            (&Layer::Fc { in_ch, .. }, LayerWeights::Fc(fw)) => {
                write_matrix(&dir.join(format!("{stem}_weight.csv")), &fw.weight, in_ch)?;
                write_matrix(&dir.join(format!("{stem}_bias.csv")), &fw.bias, 1)?;
            }
            (&Layer::ResidualBlock { in_ch, out_ch, kernel, stride, padding, .. }, LayerWeights::Residual { first, second, shortcut }) => {
                let r = residual_specs(in_ch, out_ch, kernel, stride, padding);
                save_conv(dir, &stem, &r.first, first)?;
                save_conv(dir, &format!("{stem}_2"), &r.second, second)?;
                if let (Some(s), Some(sw)) = (r.shortcut, shortcut) {
                    save_conv(dir, &format!("{stem}_shortcut"), &s, sw)?;
                }
            }
            _ => {}
        }
    }
    Ok(())
}

/// Series CSV: a `degree,threshold` line, then one coefficient per line.
pub fn series_to_csv(s: &ChebyshevSeries) -> String {
    let mut out = format!("{},{:?}\n", s.degree(), s.threshold());
    for c in s.coeffs() {
        out.push_str(&format!("{c:?}\n"));
    }
    out
}

pub fn series_from_csv(text: &str) -> snnhe_core::Result<ChebyshevSeries> {
    let m = parse_matrix(text)?;
    let (head, rest) = m.split_first().ok_or_else(|| format_err("empty series file"))?;
    let [degree, threshold] = head[..] else {
        return Err(format_err("series header must be `degree,threshold`"));
    };
    if let Some(r) = rest.iter().position(|r| r.len() != 1) {
        return Err(format_err(format!("series line {} holds more than one coefficient", r + 2)));
    }
    if degree.fract() != 0.0 || degree < 0.0 || rest.len() != degree as usize + 1 {
        return Err(format_err(format!("degree {degree} with {} coefficients", rest.len())));
    }
    ChebyshevSeries::new(rest.iter().map(|r| r[0]).collect(), threshold)
}
