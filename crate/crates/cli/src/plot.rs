//! Bare-bones SVG line chart: first CSV column on x, every other column a
//! polyline. Non-finite cells are skipped.

use std::fmt::Write as _;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const MARGIN: f64 = 50.0;
const COLORS: [&str; 6] = [
    "#000000", "#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e",
];

pub fn render_svg(csv: &str) -> Result<String, String> {
    let mut lines = csv.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<&str> = lines.next().ok_or("empty CSV")?.split(',').collect();
    if header.len() < 2 {
        return Err("need at least two columns".into());
    }
    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); header.len()];
    for (k, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != header.len() {
            return Err(format!(
                "row {} has {} cells, expected {}",
                k + 2,
                cells.len(),
                header.len()
            ));
        }
        for (c, cell) in cols.iter_mut().zip(cells) {
            c.push(
                cell.trim()
                    .parse()
                    .map_err(|_| format!("row {}: bad number {cell:?}", k + 2))?,
            );
        }
    }
    let finite = |v: &[f64]| {
        v.iter()
            .copied()
            .filter(|x| x.is_finite())
            .collect::<Vec<_>>()
    };
    let xs = finite(&cols[0]);
    let ys: Vec<f64> = cols[1..].iter().flat_map(|c| finite(c)).collect();
    if xs.is_empty() || ys.is_empty() {
        return Err("no finite data".into());
    }
    let range = |v: &[f64]| {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if hi > lo {
            (lo, hi)
        } else {
            (lo - 0.5, lo + 0.5)
        }
    };
    let (x0, x1) = range(&xs);
    let (y0, y1) = range(&ys);
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        svg,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="gray"/>"#,
        WIDTH - 2.0 * MARGIN,
        HEIGHT - 2.0 * MARGIN
    );
    let _ = writeln!(
        svg,
        r#"<text x="{MARGIN}" y="{}">{x0:.3}</text>"#,
        HEIGHT - MARGIN + 16.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="end">{x1:.3} ({})</text>"#,
        WIDTH - MARGIN,
        HEIGHT - MARGIN + 16.0,
        header[0]
    );
    let _ = writeln!(svg, r#"<text x="4" y="{}">{y0:.3}</text>"#, HEIGHT - MARGIN);
    let _ = writeln!(svg, r#"<text x="4" y="{}">{y1:.3}</text>"#, MARGIN + 4.0);
    for (k, (name, col)) in header[1..].iter().zip(&cols[1..]).enumerate() {
        let color = COLORS[k % COLORS.len()];
        let points: Vec<String> = cols[0]
            .iter()
            .zip(col)
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|(&x, &y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            points.join(" ")
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" fill="{color}">{name}</text>"#,
            WIDTH - MARGIN - 150.0,
            MARGIN + 16.0 * (k as f64 + 1.0)
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn draws_one_polyline_per_series() {
        let svg = render_svg("t,a,b\n0,1,nan\n1,2,3\n2,0,1\n").unwrap();
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.ends_with("</svg>\n"));
    }

    #[test]
    fn rejects_ragged_rows() {
        assert!(render_svg("t,a\n0\n").is_err());
        assert!(render_svg("").is_err());
        assert!(render_svg("t,a\nx,1\n").is_err());
    }
}
