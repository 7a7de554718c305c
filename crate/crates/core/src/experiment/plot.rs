use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use plotters::prelude::*;

use super::summary::{load_runs, RunData};
use crate::error::{Error, Result};
use crate::metrics::iqm;

/// IQM across series at each index, up to the shortest one, paired with `steps`.
pub fn per_step_iqm(steps: &[u64], series: &[&[f64]]) -> Result<Vec<(u64, f64)>> {
    let len = series.iter().map(|r| r.len()).min().unwrap_or(0).min(steps.len());
    (0..len)
        .map(|i| {
            let xs: Vec<f64> = series.iter().map(|r| r[i]).collect();
            Ok((steps[i], iqm(&xs)?))
        })
        .collect()
}

type Curve = (String, Vec<(u64, f64)>);

fn draw(path: &Path, title: &str, y_label: &str, curves: &[Curve], transfer: Option<u64>) -> Result<()> {
    let err = |e: Box<dyn std::error::Error>| Error::Plot(e.to_string());
    let max_x = curves.iter().flat_map(|(_, c)| c.iter().map(|p| p.0)).max().unwrap_or(1).max(1);
    let ys = curves.iter().flat_map(|(_, c)| c.iter().map(|p| p.1)).filter(|v| v.is_finite());
    let (lo, hi) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let (lo, hi) = if lo.is_finite() { (lo.min(0.0), if hi > lo { hi * 1.05 } else { lo + 1.0 }) } else { (0.0, 1.0) };

    let root = SVGBackend::new(path, (900, 540)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| err(Box::new(e)))?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 22))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(0u64..max_x, lo..hi)
        .map_err(|e| err(Box::new(e)))?;
    chart
        .configure_mesh()
        .x_desc("environment step")
        .y_desc(y_label)
        .draw()
        .map_err(|e| err(Box::new(e)))?;
    if let Some(t) = transfer {
        chart
            .draw_series(LineSeries::new([(t, lo), (t, hi)], BLACK.mix(0.4)))
            .map_err(|e| err(Box::new(e)))?;
    }
    for (i, (name, points)) in curves.iter().enumerate() {
        let color = Palette99::pick(i).to_rgba();
        chart
            .draw_series(LineSeries::new(points.iter().copied(), color.stroke_width(2)))
            .map_err(|e| err(Box::new(e)))?
            .label(name.as_str())
            .legend(move |(x, y)| PathElement::new([(x, y), (x + 18, y)], color.stroke_width(2)));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(|e| err(Box::new(e)))?;
    root.present().map_err(|e| err(Box::new(e)))?;
    Ok(())
}

/// Writes loss and reward curves (IQM across seeds per algorithm) as SVG files into `dir`.
pub fn plot_dir(dir: &Path) -> Result<Vec<PathBuf>> {
    let runs = load_runs(dir)?;
    if runs.is_empty() {
        return Ok(vec![]);
    }
    let mut groups: BTreeMap<&'static str, Vec<&RunData>> = BTreeMap::new();
    for r in &runs {
        groups.entry(r.algorithm().as_str()).or_default().push(r);
    }
    let transfer = Some(runs[0].transfer_step());
    let rewards: BTreeMap<&str, Vec<f64>> =
        runs.iter().map(|r| Ok((r.run_id.as_str(), r.smoothed_reward()?))).collect::<Result<_>>()?;
    type Pick<'a> = Box<dyn Fn(&'a RunData) -> &'a [f64] + 'a>;
    let plots: [(&str, &str, &str, Pick); 3] = [
        ("loss_on_policy.svg", "On-policy external-model loss", "smoothed MSE", Box::new(|r| &r.on_policy_smoothed)),
        (
            "loss_random_agent.svg",
            "Random-agent external-model loss",
            "smoothed MSE",
            Box::new(|r| &r.random_agent_smoothed),
        ),
        ("reward.svg", "Episode reward", "smoothed reward", Box::new(|r| &rewards[r.run_id.as_str()])),
    ];
    let mut written = Vec::new();
    for (file, title, y, value) in plots {
        let curves: Vec<Curve> = groups
            .iter()
            .map(|(name, rs)| {
                let series: Vec<&[f64]> = rs.iter().map(|r| value(r)).collect();
                Ok((format!("{name} (n={})", rs.len()), per_step_iqm(&rs[0].steps, &series)?))
            })
            .collect::<Result<_>>()?;
        let path = dir.join(file);
        draw(&path, title, y, &curves, transfer)?;
        written.push(path);
    }
    Ok(written)
}
