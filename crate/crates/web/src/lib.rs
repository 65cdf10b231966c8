//! Browser bindings for the analytic ranking engine.
//!
//! Every export takes and returns plain strings (JSON for structured data)
//! so the page needs no generated TypeScript glue beyond `wasm-bindgen`'s.
//! The [`Session`] methods do the work and are callable from native code;
//! the `#[wasm_bindgen]` wrappers only convert errors.

use dvi_core::{
    parse_network, parse_scenario, AnalyticEngine, BivariateGaussian, BusId, Metric,
    NetworkModel, Phase, ScenarioSpec,
};
use serde::Serialize;
use wasm_bindgen::prelude::*;

pub const BUNDLED_NETWORK: &str = include_str!("../../../data/ieee37.toml");
pub const BUNDLED_SCENARIO: &str = include_str!("../../../data/pv15.toml");

/// Semi-axes and orientation of the one-sigma contour of a bivariate Gaussian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Ellipse {
    pub center: [f64; 2],
    pub major: f64,
    pub minor: f64,
    /// Angle of the major axis from the real axis, in radians.
    pub angle: f64,
}

impl From<&BivariateGaussian> for Ellipse {
    fn from(g: &BivariateGaussian) -> Self {
        let (a, b, d) = (g.cov[(0, 0)], g.cov[(0, 1)], g.cov[(1, 1)]);
        let half_trace = 0.5 * (a + d);
        let spread = (0.25 * (a - d) * (a - d) + b * b).sqrt();
        Ellipse {
            center: [g.mean[0], g.mean[1]],
            major: (half_trace + spread).max(0.0).sqrt(),
            minor: (half_trace - spread).max(0.0).sqrt(),
            angle: 0.5 * (2.0 * b).atan2(a - d),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ActorEllipse {
    pub actor: BusId,
    pub ellipse: Ellipse,
}

#[derive(Debug, Clone, Serialize)]
pub struct EllipseSet {
    pub observation: (BusId, Phase),
    pub actors: Vec<ActorEllipse>,
    pub aggregate: Ellipse,
}

#[derive(Debug, Clone, Serialize)]
pub struct MeanVis {
    pub actor: BusId,
    pub mean_vis: f64,
}

/// A feeder and a scenario, validated against each other.
#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct Session {
    net: NetworkModel,
    scenario: ScenarioSpec,
}

impl Session {
    pub fn from_texts(network: &str, scenario: &str) -> Result<Session, String> {
        let net = parse_network(network).map_err(|e| format!("network: {e}"))?;
        let scenario = parse_scenario(scenario).map_err(|e| format!("scenario: {e}"))?;
        scenario.check_network(&net).map_err(|e| e.to_string())?;
        Ok(Session { net, scenario })
    }

    fn engine(&self) -> Result<AnalyticEngine<'_>, String> {
        AnalyticEngine::new(&self.net, &self.scenario).map_err(|e| e.to_string())
    }

    fn point(bus: u32, phase: &str) -> Result<(BusId, Phase), String> {
        let phase = phase.parse::<Phase>().map_err(|e| e.to_string())?;
        Ok((BusId(bus), phase))
    }

    pub fn observation_points(&self) -> Vec<(BusId, Phase)> {
        self.net.observation_points()
    }

    pub fn rank_json(&self, bus: u32, phase: &str, metric: &str) -> Result<String, String> {
        let (o, p) = Self::point(bus, phase)?;
        let metric = metric.parse::<Metric>().map_err(|e| e.to_string())?;
        let r = self.engine()?.rank(o, p, metric).map_err(|e| e.to_string())?;
        serde_json::to_string(&r).map_err(|e| e.to_string())
    }

    pub fn ellipses(&self, bus: u32, phase: &str) -> Result<EllipseSet, String> {
        let (o, p) = Self::point(bus, phase)?;
        let d = self.engine()?.distributions(o, p).map_err(|e| e.to_string())?;
        Ok(EllipseSet {
            observation: d.observation,
            actors: self
                .scenario
                .actors
                .iter()
                .zip(&d.singles)
                .map(|(a, g)| ActorEllipse {
                    actor: a.bus,
                    ellipse: g.into(),
                })
                .collect(),
            aggregate: (&d.aggregate).into(),
        })
    }

    pub fn mean_vis(&self, metric: &str) -> Result<Vec<MeanVis>, String> {
        let metric = metric.parse::<Metric>().map_err(|e| e.to_string())?;
        let rows = self.engine()?.mean_vis_all(metric).map_err(|e| e.to_string())?;
        Ok(rows
            .into_iter()
            .map(|(actor, mean_vis)| MeanVis { actor, mean_vis })
            .collect())
    }
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsValue> {
    r.and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string()))
        .map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
impl Session {
    /// Bundled feeder with the given scenario text, or the bundled scenario if empty.
    #[wasm_bindgen(constructor)]
    pub fn new(scenario: &str) -> Result<Session, JsValue> {
        let text = if scenario.trim().is_empty() { BUNDLED_SCENARIO } else { scenario };
        Session::from_texts(BUNDLED_NETWORK, text).map_err(|e| JsValue::from_str(&e))
    }

    #[wasm_bindgen(js_name = points)]
    pub fn points_js(&self) -> Result<String, JsValue> {
        to_js(Ok(self.observation_points()))
    }

    #[wasm_bindgen(js_name = rank)]
    pub fn rank_js(&self, bus: u32, phase: &str, metric: &str) -> Result<String, JsValue> {
        self.rank_json(bus, phase, metric).map_err(|e| JsValue::from_str(&e))
    }

    #[wasm_bindgen(js_name = ellipses)]
    pub fn ellipses_js(&self, bus: u32, phase: &str) -> Result<String, JsValue> {
        to_js(self.ellipses(bus, phase))
    }

    #[wasm_bindgen(js_name = meanVis)]
    pub fn mean_vis_js(&self, metric: &str) -> Result<String, JsValue> {
        to_js(self.mean_vis(metric))
    }
}

#[wasm_bindgen(js_name = bundledScenario)]
pub fn bundled_scenario() -> String {
    BUNDLED_SCENARIO.to_string()
}
