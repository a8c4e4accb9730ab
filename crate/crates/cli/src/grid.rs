//! `--grid "axis:min:max:count;..."` parsing.

use confmorph::GridAxis;

/// Parses a grid specification for a map on `dim` coordinates.
///
/// Axis labels may be a 0-based index, one of `names`, or anything else (in
/// which case the axis is taken positionally). Axes are returned in
/// coordinate order.
pub fn parse_grid(src: &str, dim: usize, names: &[String]) -> Result<Vec<GridAxis>, String> {
    let parts: Vec<&str> = src
        .split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect();
    if parts.len() != dim {
        return Err(format!(
            "grid has {} axes but the map has {dim} coordinates",
            parts.len()
        ));
    }
    let mut slots: Vec<Option<GridAxis>> = vec![None; dim];
    for (pos, part) in parts.iter().enumerate() {
        let fields: Vec<&str> = part.split(':').map(str::trim).collect();
        let [label, min, max, count] = fields[..] else {
            return Err(format!(
                "axis `{part}` is not of the form axis:min:max:count"
            ));
        };
        let num = |s: &str| -> Result<f64, String> {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| format!("`{s}` is not a finite number in axis `{part}`"))
        };
        let (min, max) = (num(min)?, num(max)?);
        let count: usize = count
            .parse()
            .map_err(|_| format!("`{count}` is not a point count in axis `{part}`"))?;
        if count == 0 {
            return Err(format!("axis `{part}` has no points"));
        }
        if min > max {
            return Err(format!("axis `{part}` has min > max"));
        }
        let index = match label.parse::<usize>() {
            Ok(i) => i,
            Err(_) => names.iter().position(|n| n == label).unwrap_or(pos),
        };
        if index >= dim {
            return Err(format!(
                "axis index {index} out of range for {dim} coordinates"
            ));
        }
        if slots[index].is_some() {
            return Err(format!("axis `{label}` given twice"));
        }
        slots[index] = Some(GridAxis::new(min, max, count));
    }
    Ok(slots
        .into_iter()
        .map(|a| a.expect("every slot filled"))
        .collect())
}
