use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Per-sample evaluation outcome.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalSample {
    pub chamfer: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ssim: Option<f64>,
    pub seconds: f64,
}

/// Aggregated evaluation run, serialized as the eval report JSON.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub label: String,
    pub config: serde_json::Value,
    pub n: usize,
    pub per_sample: Vec<EvalSample>,
    pub mean_chamfer: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_ssim: Option<f64>,
    pub mean_seconds: f64,
}

/// Aggregate per-sample results into a report. SSIM means skip samples
/// without one; the mean is `None` only when no sample has an SSIM.
pub fn evaluate_run(
    label: &str,
    config: serde_json::Value,
    per_sample: Vec<EvalSample>,
) -> Result<EvalReport> {
    if per_sample.is_empty() {
        return Err(Error::InvalidArgument("evaluation run with no samples".into()));
    }
    let n = per_sample.len();
    let mean_chamfer = per_sample.iter().map(|s| s.chamfer).sum::<f64>() / n as f64;
    let mean_seconds = per_sample.iter().map(|s| s.seconds).sum::<f64>() / n as f64;
    let ssims: Vec<f64> = per_sample.iter().filter_map(|s| s.ssim).collect();
    let mean_ssim = if ssims.is_empty() {
        None
    } else {
        Some(ssims.iter().sum::<f64>() / ssims.len() as f64)
    };
    Ok(EvalReport {
        label: label.to_string(),
        config,
        n,
        per_sample,
        mean_chamfer,
        mean_ssim,
        mean_seconds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn means_match_hand_computed_values() {
        let samples = vec![
            EvalSample { chamfer: 1.0, ssim: Some(0.9), seconds: 0.5 },
            EvalSample { chamfer: 3.0, ssim: Some(0.7), seconds: 1.5 },
            EvalSample { chamfer: 2.0, ssim: None, seconds: 1.0 },
        ];
        let r = evaluate_run("test", serde_json::json!({"k": 1}), samples).unwrap();
        assert_eq!(r.n, 3);
        assert!((r.mean_chamfer - 2.0).abs() < 1e-12);
        assert!((r.mean_ssim.unwrap() - 0.8).abs() < 1e-12);
        assert!((r.mean_seconds - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ssim_mean_absent_when_no_sample_has_one() {
        let samples = vec![EvalSample { chamfer: 1.0, ssim: None, seconds: 0.1 }];
        let r = evaluate_run("raw", serde_json::Value::Null, samples).unwrap();
        assert!(r.mean_ssim.is_none());
        let json = serde_json::to_string(&r).unwrap();
        assert!(!json.contains("mean_ssim"));
        assert!(!json.contains("\"ssim\""));
    }

    #[test]
    fn report_round_trips_through_json() {
        let samples = vec![
            EvalSample { chamfer: 0.25, ssim: Some(0.95), seconds: 2.0 },
            EvalSample { chamfer: 0.75, ssim: Some(0.85), seconds: 4.0 },
        ];
        let r = evaluate_run("refined", serde_json::json!({"refine": "spr"}), samples).unwrap();
        let back: EvalReport = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        assert_eq!(back.n, 2);
        assert_eq!(back.label, "refined");
        assert_eq!(back.per_sample.len(), 2);
        assert_eq!(back.mean_chamfer.to_bits(), r.mean_chamfer.to_bits());
    }

    #[test]
    fn empty_run_is_an_error() {
        assert!(evaluate_run("x", serde_json::Value::Null, vec![]).is_err());
    }
}
