use std::path::{Path, PathBuf};

use qpc_core::bok::{
    exact_curve, filter_trivial, mc_curve, mean_curve, oracle_curve, BokCurve, CandidatePool,
    RawPool, TiePolicy,
};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{read_records, write_json};
use crate::args::BokArgs;
use crate::config::LoadedConfig;
use crate::error::{CliError, Result};
use crate::runlog::RunLog;
use crate::svg;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelCurves {
    pub model: String,
    pub pools: usize,
    pub dropped_trivial: usize,
    pub exact: Vec<BokCurve>,
    pub oracle: Vec<BokCurve>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub monte_carlo: Vec<BokCurve>,
    pub mean_exact: Vec<f64>,
    pub mean_oracle: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub mean_monte_carlo: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveBundle {
    pub tie: TiePolicy,
    pub seed: u64,
    pub models: Vec<ModelCurves>,
}

fn parse_spec(spec: &str) -> (String, PathBuf) {
    match spec.split_once('=') {
        Some((name, path)) if !name.is_empty() => (name.to_owned(), PathBuf::from(path)),
        _ => {
            let path = PathBuf::from(spec);
            let name = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| spec.to_owned());
            (name, path)
        }
    }
}

pub fn load_pools(path: &Path) -> Result<Vec<CandidatePool>> {
    read_records::<RawPool>(path)?
        .into_iter()
        .map(|p| Ok(p.into_pool()?))
        .collect()
}

pub fn curves_for(
    model: &str,
    pools: Vec<CandidatePool>,
    args: &BokArgs,
    seed: u64,
) -> ModelCurves {
    let total = pools.len();
    let (pools, dropped) = if args.filter_trivial {
        filter_trivial(pools)
    } else {
        (pools, 0)
    };
    let exact: Vec<BokCurve> = pools.iter().map(|p| exact_curve(p, args.tie)).collect();
    let oracle: Vec<BokCurve> = pools.iter().map(oracle_curve).collect();
    let monte_carlo: Vec<BokCurve> = match args.mc_samples {
        Some(n) => pools
            .iter()
            .map(|p| mc_curve(p, n, seed, args.tie))
            .collect(),
        None => Vec::new(),
    };
    ModelCurves {
        model: model.to_owned(),
        pools: total,
        dropped_trivial: dropped,
        mean_exact: mean_curve(&exact),
        mean_oracle: mean_curve(&oracle),
        mean_monte_carlo: mean_curve(&monte_carlo),
        exact,
        oracle,
        monte_carlo,
    }
}

pub fn csv_text(bundle: &CurveBundle, with_mc: bool) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["k", "model", "exact", "oracle"];
    if with_mc {
        header.push("monte_carlo");
    }
    let csv_err = |e: csv::Error| CliError::Data(format!("csv: {e}"));
    w.write_record(&header).map_err(csv_err)?;
    for m in &bundle.models {
        for (i, v) in m.mean_exact.iter().enumerate() {
            let mut row = vec![
                (i + 1).to_string(),
                m.model.clone(),
                format!("{v:.6}"),
                format!("{:.6}", m.mean_oracle[i]),
            ];
            if with_mc {
                row.push(
                    m.mean_monte_carlo
                        .get(i)
                        .map(|x| format!("{x:.6}"))
                        .unwrap_or_default(),
                );
            }
            w.write_record(&row).map_err(csv_err)?;
        }
    }
    let bytes = w
        .into_inner()
        .map_err(|e| CliError::Data(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn run(cfg: &LoadedConfig, args: &BokArgs) -> Result<CurveBundle> {
    let mut log = RunLog::new("bok", cfg);
    let mut models = Vec::new();
    for spec in &args.pools {
        let (name, path) = parse_spec(spec);
        log.input(&path)?;
        let pools = load_pools(&path)?;
        models.push(curves_for(&name, pools, args, cfg.config.seed));
    }
    let bundle = CurveBundle {
        tie: args.tie,
        seed: cfg.config.seed,
        models,
    };
    std::fs::create_dir_all(&args.out_dir).map_err(|e| CliError::io(&args.out_dir, e))?;
    let csv_path = args.out_dir.join("bok.csv");
    let text = csv_text(&bundle, args.mc_samples.is_some())?;
    qpc_core::jsonl::write_atomic(&csv_path, text.as_bytes())
        .map_err(|e| CliError::io(&csv_path, e))?;
    log.output(&csv_path)?;
    let json_path = args.out_dir.join("bok.json");
    write_json(&json_path, &bundle)?;
    log.output(&json_path)?;
    if args.svg {
        let series: Vec<(String, Vec<f64>)> = bundle
            .models
            .iter()
            .flat_map(|m| {
                [
                    (m.model.clone(), m.mean_exact.clone()),
                    (format!("{} (oracle)", m.model), m.mean_oracle.clone()),
                ]
            })
            .collect();
        let svg_path = args.out_dir.join("bok.svg");
        let text = svg::line_plot("best-of-k", "k", "accuracy", &series);
        qpc_core::jsonl::write_atomic(&svg_path, text.as_bytes())
            .map_err(|e| CliError::io(&svg_path, e))?;
        log.output(&svg_path)?;
    }
    log.summary(json!({
        "models": bundle.models.iter().map(|m| json!({
            "model": m.model, "pools": m.pools, "dropped_trivial": m.dropped_trivial,
        })).collect::<Vec<_>>(),
    }));
    log.finish(&json_path)?;
    Ok(bundle)
}
